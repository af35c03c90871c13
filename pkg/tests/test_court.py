"""Rasterization and decoding contracts, including frozen golden files."""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rallycast.court import (
    CourtFrame,
    NoLandingError,
    ResponseMap,
    decode_landing,
    encode_perception,
    encode_response,
    quantize,
    to_png_bytes,
)

GOLDEN_DIR = Path(__file__).parent / "golden"

FIXED_BALL = [(2.0, 2.0), (8.0, 3.2), (14.0, 4.8), (20.0, 7.5)]
FIXED_OPP = [(1.5, 8.0), (2.2, 8.4), (3.0, 8.9)]
FIXED_RECV = [(21.0, 2.0), (21.5, 2.8), (22.0, 3.5)]
FIXED_RESPONSE = [(21.0, 3.0), (15.0, 4.5), (6.0, 8.0)]


def _check_golden(name: str, actual: np.ndarray):
    """Compare against the frozen array, writing it on first generation."""
    GOLDEN_DIR.mkdir(exist_ok=True)
    path = GOLDEN_DIR / f"{name}.npy"
    if not path.exists():
        np.save(path, actual)
        (GOLDEN_DIR / f"{name}.png").write_bytes(to_png_bytes(actual / 255.0))
        pytest.skip(f"golden file {name} generated; rerun to compare")
    frozen = np.load(path)
    np.testing.assert_array_equal(actual, frozen)


class TestFrame:
    def test_roundtrip_within_half_pixel(self):
        frame = CourtFrame()
        ex, ey = frame.pixel_extent_m
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = rng.uniform(*frame.x_range)
            y = rng.uniform(*frame.y_range)
            u, v = frame.to_pixel(x, y)
            col, row = int(min(u, frame.image_size - 1e-9)), int(min(v, frame.image_size - 1e-9))
            bx, by = frame.pixel_center_m(col, row)
            assert abs(bx - x) <= ex / 2 + 1e-12
            assert abs(by - y) <= ey / 2 + 1e-12

    def test_transform_invertible(self):
        frame = CourtFrame(image_size=128)
        for x, y in [(0.0, 0.0), (23.77, 10.97), (11.885, 5.485), (-2.0, -2.0)]:
            u, v = frame.to_pixel(x, y)
            bx, by = frame.to_meters(u, v)
            assert abs(bx - x) < 1e-9 and abs(by - y) < 1e-9


class TestEncodePerception:
    def test_empty_tracks_all_zero(self):
        img = encode_perception([], [], [], CourtFrame())
        assert img.pixels.shape == (64, 64, 3)
        assert not img.pixels.any()
        assert not img.clipped

    def test_ball_segment_endpoints_land_on_transform(self):
        frame = CourtFrame()
        img = encode_perception([(0.0, 0.0), (23.77, 10.97)], [], [], frame)
        for x, y in [(0.0, 0.0), (23.77, 10.97)]:
            u, v = frame.to_pixel(x, y)
            r, c = int(v), int(u)
            patch = img.pixels[max(0, r - 3):r + 4, max(0, c - 3):c + 4, 0]
            assert patch.max() > 0.5    # stroke/marker present at the endpoint

    def test_out_of_frame_point_clips_and_flags(self):
        img = encode_perception([(-10.0, 5.0), (10.0, 5.0)], [], [], CourtFrame())
        assert img.clipped

    def test_intensities_in_unit_range(self):
        img = encode_perception(FIXED_BALL, FIXED_OPP, FIXED_RECV, CourtFrame())
        assert img.pixels.min() >= 0.0 and img.pixels.max() <= 1.0

    def test_golden_determinism(self):
        img = encode_perception(FIXED_BALL, FIXED_OPP, FIXED_RECV, CourtFrame())
        again = encode_perception(FIXED_BALL, FIXED_OPP, FIXED_RECV, CourtFrame())
        np.testing.assert_array_equal(img.pixels, again.pixels)
        _check_golden("perception_fixed", quantize(img))


class TestEncodeResponse:
    def test_empty_trajectory_all_zero(self):
        rm = encode_response([], CourtFrame())
        assert not rm.pixels.any()

    def test_disc_centered_at_transform_of_center(self):
        frame = CourtFrame()
        cx, cy = frame.court_center()
        rm = encode_response([(cx, cy)], frame)
        u, v = frame.to_pixel(cx, cy)
        assert rm.pixels[int(v), int(u)] > 0.9

    def test_golden_determinism(self):
        rm = encode_response(FIXED_RESPONSE, CourtFrame())
        _check_golden("response_fixed", quantize(rm))


class TestDecodeLanding:
    def test_disc_at_known_pixel(self):
        frame = CourtFrame()
        target = frame.pixel_center_m(32, 16)
        rm = encode_response([target], frame)
        (x, y), conf = decode_landing(rm, frame)
        ex, ey = frame.pixel_extent_m
        assert abs(x - target[0]) <= ex / 2
        assert abs(y - target[1]) <= ey / 2
        assert 0.0 < conf <= 1.0

    def test_roundtrip_100_random_points(self):
        frame = CourtFrame()
        rng = np.random.default_rng(42)
        tol = max(frame.pixel_extent_m)
        for _ in range(100):
            p = (rng.uniform(0, frame.length_m), rng.uniform(0, frame.width_m))
            rm = encode_response([p], frame)
            (x, y), _ = decode_landing(rm, frame)
            assert np.hypot(x - p[0], y - p[1]) < tol

    def test_roundtrip_with_full_trajectory(self):
        frame = CourtFrame()
        rng = np.random.default_rng(43)
        tol = max(frame.pixel_extent_m)
        for _ in range(50):
            start = (rng.uniform(15, 23), rng.uniform(1, 10))
            end = (rng.uniform(1, 10), rng.uniform(1, 10))
            mid = ((start[0] + end[0]) / 2, (start[1] + end[1]) / 2 + rng.uniform(-1, 1))
            rm = encode_response([start, mid, end], frame)
            (x, y), _ = decode_landing(rm, frame)
            assert np.hypot(x - end[0], y - end[1]) < tol

    def test_all_zero_map_raises(self):
        with pytest.raises(NoLandingError):
            decode_landing(ResponseMap(pixels=np.zeros((64, 64))), CourtFrame())

    @settings(max_examples=25, deadline=None)
    @given(st.floats(1.0, 22.0), st.floats(1.0, 10.0))
    def test_roundtrip_property(self, x, y):
        frame = CourtFrame()
        rm = encode_response([(x, y)], frame)
        (dx, dy), _ = decode_landing(rm, frame)
        assert np.hypot(dx - x, dy - y) < max(frame.pixel_extent_m)
