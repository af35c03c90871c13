"""Court rasterization: rally state -> perception image, response map -> meters.

Conventions
-----------
World coordinates are court meters: x runs along the court length (0 at one
baseline), y across the width.  The drawable area extends ``margin_m`` beyond
the court on every side.  Pixel columns map to x and rows to y; pixel (i, j)
covers the half-open square [i, i+1) x [j, j+1) in continuous pixel
coordinates, with its center at (+0.5, +0.5).

The perception image is three-plane: the incoming ball trajectory is drawn in
the red plane, opponent feet in blue, receiver feet in red+blue (magenta), and
the ball start/end markers in red+green (yellow).  Response maps are a single
plane: the return trajectory as a dim stroke plus a bright landing disc.  The
stroke level is kept below the decoding threshold so the disc alone determines
the decoded landing point.

All drawing is plain float arithmetic on NumPy grids and is deterministic
across platforms; golden files pin the outputs.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

COURT_LENGTH_M = 23.77
COURT_WIDTH_M = 10.97
DEFAULT_MARGIN_M = 2.0

STROKE_LEVEL = 1.0          # perception strokes
RESPONSE_STROKE_LEVEL = 0.45  # below DECODE_TAU: the landing disc dominates
DECODE_TAU = 0.5


class NoLandingError(ValueError):
    """The response map has no pixel above the decoding threshold."""


@dataclass(frozen=True)
class CourtFrame:
    """Affine pixel<->meter calibration for a square raster of the court."""

    length_m: float = COURT_LENGTH_M
    width_m: float = COURT_WIDTH_M
    margin_m: float = DEFAULT_MARGIN_M
    image_size: int = 64

    @property
    def x_range(self) -> tuple[float, float]:
        return (-self.margin_m, self.length_m + self.margin_m)

    @property
    def y_range(self) -> tuple[float, float]:
        return (-self.margin_m, self.width_m + self.margin_m)

    @property
    def pixel_extent_m(self) -> tuple[float, float]:
        """Meters covered by one pixel along (x, y)."""
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        return ((x1 - x0) / self.image_size, (y1 - y0) / self.image_size)

    def to_pixel(self, x: float, y: float) -> tuple[float, float]:
        """Meters -> continuous pixel coordinates (col, row)."""
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        u = (x - x0) / (x1 - x0) * self.image_size
        v = (y - y0) / (y1 - y0) * self.image_size
        return u, v

    def to_meters(self, u: float, v: float) -> tuple[float, float]:
        """Continuous pixel coordinates (col, row) -> meters."""
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        x = x0 + u / self.image_size * (x1 - x0)
        y = y0 + v / self.image_size * (y1 - y0)
        return x, y

    def pixel_center_m(self, col: int, row: int) -> tuple[float, float]:
        return self.to_meters(col + 0.5, row + 0.5)

    def contains(self, x: float, y: float) -> bool:
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        return x0 <= x <= x1 and y0 <= y <= y1

    def court_center(self) -> tuple[float, float]:
        return self.length_m / 2.0, self.width_m / 2.0

    def meta(self) -> dict:
        return {"length_m": self.length_m, "width_m": self.width_m,
                "margin_m": self.margin_m, "image_size": self.image_size}


@dataclass
class PerceptionImage:
    pixels: np.ndarray          # (S, S, 3) in [0, 1]
    clipped: bool = False


@dataclass
class ResponseMap:
    pixels: np.ndarray          # (S, S) in [0, 1]
    clipped: bool = False


# -- low-level drawing -------------------------------------------------------------


def _blend(plane: np.ndarray, row: int, col: int, value: float) -> None:
    if 0 <= row < plane.shape[0] and 0 <= col < plane.shape[1]:
        if value > plane[row, col]:
            plane[row, col] = value


def draw_line_aa(plane: np.ndarray, p0: tuple[float, float], p1: tuple[float, float],
                 level: float) -> None:
    """Anti-aliased 1-pixel stroke (Wu's method) between continuous pixel coords."""
    # work in center coordinates: integer c corresponds to pixel center c + 0.5
    x0, y0 = p0[0] - 0.5, p0[1] - 0.5
    x1, y1 = p1[0] - 0.5, p1[1] - 0.5
    steep = abs(y1 - y0) > abs(x1 - x0)
    if steep:
        x0, y0, x1, y1 = y0, x0, y1, x1
    if x0 > x1:
        x0, x1 = x1, x0
        y0, y1 = y1, y0
    dx = x1 - x0
    dy = y1 - y0
    gradient = dy / dx if dx != 0.0 else 0.0

    def plot(px: int, py: float, c: float) -> None:
        fy = math.floor(py)
        for row, cov in ((fy, 1.0 - (py - fy)), (fy + 1, py - fy)):
            val = level * c * cov
            if steep:
                _blend(plane, px, int(row), val)
            else:
                _blend(plane, int(row), px, val)

    xend = round(x0)
    yend = y0 + gradient * (xend - x0)
    xgap = 1.0 - (x0 + 0.5 - math.floor(x0 + 0.5))
    xpx1 = int(xend)
    plot(xpx1, yend, xgap)
    intery = yend + gradient

    xend = round(x1)
    yend = y1 + gradient * (xend - x1)
    xgap = x1 + 0.5 - math.floor(x1 + 0.5)
    xpx2 = int(xend)

    for px in range(xpx1 + 1, xpx2):
        plot(px, intery, 1.0)
        intery += gradient
    plot(xpx2, yend, xgap)


def draw_disc(plane: np.ndarray, center: tuple[float, float], radius: float,
              level: float) -> None:
    """Filled anti-aliased disc; ``center`` in continuous pixel coordinates."""
    cu, cv = center
    size_v, size_u = plane.shape
    lo_u = max(0, int(math.floor(cu - radius - 1)))
    hi_u = min(size_u, int(math.ceil(cu + radius + 1)))
    lo_v = max(0, int(math.floor(cv - radius - 1)))
    hi_v = min(size_v, int(math.ceil(cv + radius + 1)))
    for row in range(lo_v, hi_v):
        for col in range(lo_u, hi_u):
            dist = math.hypot(col + 0.5 - cu, row + 0.5 - cv)
            cov = min(1.0, max(0.0, radius + 0.5 - dist))
            if cov > 0.0:
                _blend(plane, row, col, level * cov)


_STAR_ANGLES = [(-90.0 + i * 36.0) * math.pi / 180.0 for i in range(10)]


def _star_polygon(cu: float, cv: float, radius: float) -> list[tuple[float, float]]:
    pts = []
    for i, ang in enumerate(_STAR_ANGLES):
        r = radius if i % 2 == 0 else 0.42 * radius
        pts.append((cu + r * math.cos(ang), cv + r * math.sin(ang)))
    return pts


def _point_in_polygon(px: float, py: float, poly: list[tuple[float, float]]) -> bool:
    inside = False
    j = len(poly) - 1
    for i in range(len(poly)):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > py) != (yj > py):
            x_cross = (xj - xi) * (py - yi) / (yj - yi) + xi
            if px < x_cross:
                inside = not inside
        j = i
    return inside


def draw_star(plane: np.ndarray, center: tuple[float, float], radius: float,
              level: float) -> None:
    """Five-point star glyph, 4x4 supersampled coverage."""
    cu, cv = center
    poly = _star_polygon(cu, cv, radius)
    size_v, size_u = plane.shape
    lo_u = max(0, int(math.floor(cu - radius - 1)))
    hi_u = min(size_u, int(math.ceil(cu + radius + 1)))
    lo_v = max(0, int(math.floor(cv - radius - 1)))
    hi_v = min(size_v, int(math.ceil(cv + radius + 1)))
    sub = [(i + 0.5) / 4.0 for i in range(4)]
    for row in range(lo_v, hi_v):
        for col in range(lo_u, hi_u):
            hits = 0
            for dv in sub:
                for du in sub:
                    if _point_in_polygon(col + du, row + dv, poly):
                        hits += 1
            if hits:
                _blend(plane, row, col, level * hits / 16.0)


# -- encoding ------------------------------------------------------------------------


def _clip_point(frame: CourtFrame, x: float, y: float) -> tuple[float, float, bool]:
    (x0, x1), (y0, y1) = frame.x_range, frame.y_range
    cx = min(max(x, x0), x1)
    cy = min(max(y, y0), y1)
    return cx, cy, (cx != x or cy != y)


def _draw_track(plane: np.ndarray, frame: CourtFrame, points, level: float) -> bool:
    """Polyline through ``points`` (meters); returns whether clipping occurred."""
    clipped = False
    px = []
    for x, y in points:
        cx, cy, was_clipped = _clip_point(frame, float(x), float(y))
        clipped = clipped or was_clipped
        px.append(frame.to_pixel(cx, cy))
    if len(px) == 1:
        draw_disc(plane, px[0], 0.8, level)
    else:
        for a, b in zip(px[:-1], px[1:]):
            draw_line_aa(plane, a, b, level)
    return clipped


def _marker_radius(frame: CourtFrame) -> float:
    return 1.6 * frame.image_size / 64.0


def encode_perception(ball_track, opponent_feet, receiver_feet,
                      frame: CourtFrame) -> PerceptionImage:
    """Rasterize one observed shot from the receiver's viewpoint.

    Each track is a sequence of (x, y) meters; empty tracks are skipped.  The
    ball gets a start star and an end disc (both in the red+green planes);
    feet tracks get an end disc in their own color.  Points outside the frame
    are clipped to its edge and flagged.
    """
    size = frame.image_size
    img = np.zeros((size, size, 3))
    clipped = False
    mr = _marker_radius(frame)

    def endpoint(track):
        x, y = float(track[-1][0]), float(track[-1][1])
        cx, cy, _ = _clip_point(frame, x, y)
        return frame.to_pixel(cx, cy)

    def startpoint(track):
        x, y = float(track[0][0]), float(track[0][1])
        cx, cy, _ = _clip_point(frame, x, y)
        return frame.to_pixel(cx, cy)

    opponent_feet = list(opponent_feet)
    receiver_feet = list(receiver_feet)
    ball_track = list(ball_track)

    if opponent_feet:
        clipped |= _draw_track(img[:, :, 2], frame, opponent_feet, STROKE_LEVEL)
        draw_disc(img[:, :, 2], endpoint(opponent_feet), mr, 1.0)
    if receiver_feet:
        for plane in (img[:, :, 0], img[:, :, 2]):
            clipped |= _draw_track(plane, frame, receiver_feet, STROKE_LEVEL)
        for plane in (img[:, :, 0], img[:, :, 2]):
            draw_disc(plane, endpoint(receiver_feet), mr, 1.0)
    if ball_track:
        clipped |= _draw_track(img[:, :, 0], frame, ball_track, STROKE_LEVEL)
        # start star and end disc in yellow (red + green planes)
        for plane in (img[:, :, 0], img[:, :, 1]):
            draw_star(plane, startpoint(ball_track), 2.5 * size / 64.0, 1.0)
            draw_disc(plane, endpoint(ball_track), mr, 1.0)

    np.clip(img, 0.0, 1.0, out=img)
    return PerceptionImage(pixels=img, clipped=clipped)


def disc_radius_px(frame: CourtFrame) -> float:
    return 2.0 * frame.image_size / 64.0


def encode_response(track, frame: CourtFrame) -> ResponseMap:
    """Rasterize a return trajectory: dim stroke plus bright landing disc."""
    size = frame.image_size
    plane = np.zeros((size, size))
    track = list(track)
    clipped = False
    if track:
        if len(track) > 1:
            clipped = _draw_track(plane, frame, track, RESPONSE_STROKE_LEVEL)
        x, y = float(track[-1][0]), float(track[-1][1])
        cx, cy, was_clipped = _clip_point(frame, x, y)
        clipped = clipped or was_clipped
        draw_disc(plane, frame.to_pixel(cx, cy), disc_radius_px(frame), 1.0)
    np.clip(plane, 0.0, 1.0, out=plane)
    return ResponseMap(pixels=plane, clipped=clipped)


# -- decoding ------------------------------------------------------------------------


def _smooth3(arr: np.ndarray) -> np.ndarray:
    padded = np.pad(arr, 1)
    out = np.zeros_like(arr)
    for dr in range(3):
        for dc in range(3):
            out += padded[dr:dr + arr.shape[0], dc:dc + arr.shape[1]]
    return out / 9.0


def _component_mask(above: np.ndarray, seed: tuple[int, int]) -> np.ndarray:
    """8-connected component of ``seed`` within the boolean ``above`` mask."""
    mask = np.zeros_like(above, dtype=bool)
    stack = [seed]
    mask[seed] = True
    rows, cols = above.shape
    while stack:
        r, c = stack.pop()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols and above[rr, cc] and not mask[rr, cc]:
                    mask[rr, cc] = True
                    stack.append((rr, cc))
    return mask


def decode_landing(response, frame: CourtFrame,
                   tau: float = DECODE_TAU) -> tuple[tuple[float, float], float]:
    """Extract the landing point (meters) and a confidence from a response map.

    The map is smoothed 3x3, the connected component holding the global max is
    taken, and its intensity-weighted centroid is mapped back to meters.
    Confidence is the component's share of the total smoothed mass.
    """
    arr = response.pixels if isinstance(response, ResponseMap) else np.asarray(response)
    if arr.ndim != 2:
        raise ValueError(f"response map must be 2-D, got shape {arr.shape}")
    smoothed = _smooth3(arr)
    peak = smoothed.max()
    if peak < tau:
        raise NoLandingError(
            f"no pixel above threshold {tau} (max smoothed intensity {peak:.4f})")
    seed = np.unravel_index(int(np.argmax(smoothed)), smoothed.shape)
    component = _component_mask(smoothed >= tau, seed)
    weights = smoothed[component]
    rows, cols = np.nonzero(component)
    total = float(weights.sum())
    v = float((weights * (rows + 0.5)).sum() / total)
    u = float((weights * (cols + 0.5)).sum() / total)
    confidence = total / float(smoothed.sum())
    return frame.to_meters(u, v), confidence


# -- PNG I/O ---------------------------------------------------------------------------


def to_png_bytes(image) -> bytes:
    """Encode a PerceptionImage / ResponseMap / array as PNG bytes."""
    from PIL import Image

    arr = image.pixels if hasattr(image, "pixels") else np.asarray(image)
    data = np.clip(np.asarray(arr) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    mode = "RGB" if data.ndim == 3 else "L"
    return _encode_png(Image.fromarray(data, mode=mode))


def _encode_png(img) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def quantize(image) -> np.ndarray:
    """uint8 view of an image's pixels (used by golden-file tests)."""
    arr = image.pixels if hasattr(image, "pixels") else np.asarray(image)
    return np.clip(np.asarray(arr) * 255.0 + 0.5, 0, 255).astype(np.uint8)
