"""Featurization: dataset records -> model inputs.

Every shot is normalized to the receiver's perspective by rotating the court
180 degrees when the receiver is on the low-x side, so the receiver always
defends the high-x baseline.  The perception image, sparse feature blocks and
ground-truth response map are all produced in this normalized frame; location
errors are reported in it too (distances are rotation-invariant).

Sparse blocks: incoming speed (10 bins over 5-55 m/s), incoming angle (18 bins
over -90..90 degrees, computed from the normalized trajectory), opponent
identity (one-hot over the player directory) and the game score (two 5-way
one-hots over 00/15/30/40/AD).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .court import CourtFrame, PerceptionImage, ResponseMap, encode_perception, encode_response
from .synth import COURT_LENGTH_M, COURT_WIDTH_M, POINT_TOKENS, ShotRecord

SPEED_BINS = 10
SPEED_RANGE = (5.0, 55.0)
ANGLE_BINS = 18
ANGLE_RANGE = (-90.0, 90.0)
POINTS_DIM = 2 * len(POINT_TOKENS)


class DirectoryFullError(RuntimeError):
    """The player directory has no free opponent slots left."""


@dataclass
class PlayerDirectory:
    """Stable player-id -> one-hot index assignment, first come first served."""

    max_players: int = 8
    ids: list[str] = field(default_factory=list)

    def index_of(self, player_id: str, create: bool = True) -> int:
        if player_id in self.ids:
            return self.ids.index(player_id)
        if not create:
            raise KeyError(f"unknown player id {player_id!r}")
        if len(self.ids) >= self.max_players:
            raise DirectoryFullError(
                f"player directory full ({self.max_players} slots); cannot add "
                f"{player_id!r}")
        self.ids.append(player_id)
        return len(self.ids) - 1

    def onehot(self, player_id: str, create: bool = True) -> np.ndarray:
        vec = np.zeros(self.max_players)
        vec[self.index_of(player_id, create=create)] = 1.0
        return vec


@dataclass
class ShotContext:
    """One observed shot from the receiver's perspective, model-ready."""

    perception: PerceptionImage
    speed_onehot: np.ndarray
    angle_onehot: np.ndarray
    opponent_onehot: np.ndarray
    points_onehot: np.ndarray
    timestamp: int
    receiver_id: str
    opponent_id: str
    shot_type_label: str | None = None
    target_map: ResponseMap | None = None          # ground-truth response raster
    target_landing: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    def sparse(self) -> np.ndarray:
        for name, block in (("speed", self.speed_onehot), ("angle", self.angle_onehot),
                            ("opponent", self.opponent_onehot)):
            hot = int(np.count_nonzero(block))
            if hot != 1:
                raise ValueError(f"{name} block must be one-hot, has {hot} nonzeros")
        half = len(POINT_TOKENS)
        for name, block in (("receiver points", self.points_onehot[:half]),
                            ("opponent points", self.points_onehot[half:])):
            if int(np.count_nonzero(block)) != 1:
                raise ValueError(f"{name} block must be one-hot")
        return np.concatenate([self.speed_onehot, self.angle_onehot,
                               self.opponent_onehot, self.points_onehot])

    def sparse_dim(self) -> int:
        return (self.speed_onehot.size + self.angle_onehot.size
                + self.opponent_onehot.size + self.points_onehot.size)


def sparse_width(max_players: int) -> int:
    return SPEED_BINS + ANGLE_BINS + max_players + POINTS_DIM


def bin_onehot(value: float, bins: int, lo: float, hi: float) -> np.ndarray:
    idx = int((value - lo) / (hi - lo) * bins)
    idx = min(max(idx, 0), bins - 1)
    vec = np.zeros(bins)
    vec[idx] = 1.0
    return vec


def score_onehot(score: str) -> np.ndarray:
    try:
        mine, theirs = score.split("-")
        i, j = POINT_TOKENS.index(mine), POINT_TOKENS.index(theirs)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"unparseable score {score!r}; expected tokens like '30-15'") from exc
    vec = np.zeros(POINTS_DIM)
    vec[i] = 1.0
    vec[len(POINT_TOKENS) + j] = 1.0
    return vec


def _rotate_xy(points, flip: bool):
    out = []
    for p in points:
        x, y = float(p[0]), float(p[1])
        if flip:
            x, y = COURT_LENGTH_M - x, COURT_WIDTH_M - y
        out.append((x, y) + tuple(float(v) for v in p[2:]))
    return out


def normalized_geometry(record: ShotRecord) -> dict:
    """Record geometry rotated so the receiver defends the high-x baseline."""
    recv_x = float(np.mean([p[0] for p in record.receiver_feet]))
    flip = recv_x < COURT_LENGTH_M / 2.0
    ball = _rotate_xy([(p[0], p[1], p[2], p[3]) for p in record.ball_xyz_t], flip)
    nxt = _rotate_xy([(p[0], p[1], p[2], p[3]) for p in record.next_ball_xyz_t], flip)
    return {
        "flip": flip,
        "ball": ball,
        "next": nxt,
        "hitter_feet": _rotate_xy(record.hitter_feet, flip),
        "receiver_feet": _rotate_xy(record.receiver_feet, flip),
    }


def incident_angle_deg(ball_xy) -> float:
    """Direction of the final incoming segment, degrees, clipped to +-90."""
    (x0, y0), (x1, y1) = ball_xy[-2][:2], ball_xy[-1][:2]
    ang = math.degrees(math.atan2(y1 - y0, x1 - x0))
    if ang > 90.0:
        ang = 180.0 - ang
    elif ang < -90.0:
        ang = -180.0 - ang
    return ang


def build_shot_context(record: ShotRecord, frame: CourtFrame,
                       directory: PlayerDirectory, *, with_target: bool = True,
                       create_players: bool = True) -> ShotContext:
    geo = normalized_geometry(record)
    perception = encode_perception(
        [(p[0], p[1]) for p in geo["ball"]],
        [(p[0], p[1]) for p in geo["hitter_feet"]],
        [(p[0], p[1]) for p in geo["receiver_feet"]],
        frame)
    target_map = None
    target_landing = None
    if with_target and record.next_ball_xyz_t:
        target_map = encode_response([(p[0], p[1]) for p in geo["next"]], frame)
        last = geo["next"][-1]
        target_landing = (float(last[0]), float(last[1]))
    # opponent id slots are shared with receiver ids in one directory
    directory.index_of(record.receiver, create=create_players)
    return ShotContext(
        perception=perception,
        speed_onehot=bin_onehot(record.speed_mps, SPEED_BINS, *SPEED_RANGE),
        angle_onehot=bin_onehot(incident_angle_deg(geo["ball"]), ANGLE_BINS, *ANGLE_RANGE),
        opponent_onehot=directory.onehot(record.hitter, create=create_players),
        points_onehot=score_onehot(record.score),
        timestamp=record.ts,
        receiver_id=record.receiver,
        opponent_id=record.hitter,
        shot_type_label=record.shot_type,
        target_map=target_map,
        target_landing=target_landing,
        meta={"match_id": record.match_id, "rally_id": record.rally_id, "ts": record.ts},
    )


def override_context(context: ShotContext, directory: PlayerDirectory, *,
                     opponent: str | None = None, score: str | None = None,
                     speed_bin: int | None = None, angle_bin: int | None = None) -> ShotContext:
    """Copy a context with selected sparse blocks replaced (what-if probes)."""
    new = ShotContext(
        perception=context.perception,
        speed_onehot=context.speed_onehot.copy(),
        angle_onehot=context.angle_onehot.copy(),
        opponent_onehot=context.opponent_onehot.copy(),
        points_onehot=context.points_onehot.copy(),
        timestamp=context.timestamp,
        receiver_id=context.receiver_id,
        opponent_id=context.opponent_id,
        shot_type_label=context.shot_type_label,
        target_map=context.target_map,
        target_landing=context.target_landing,
        meta=dict(context.meta),
    )
    if opponent is not None:
        new.opponent_onehot = directory.onehot(opponent, create=False)
        new.opponent_id = opponent
    if score is not None:
        new.points_onehot = score_onehot(score)
    if speed_bin is not None:
        if not 0 <= speed_bin < SPEED_BINS:
            raise ValueError(f"speed bin {speed_bin} out of range 0..{SPEED_BINS - 1}")
        new.speed_onehot = np.zeros(SPEED_BINS)
        new.speed_onehot[speed_bin] = 1.0
    if angle_bin is not None:
        if not 0 <= angle_bin < ANGLE_BINS:
            raise ValueError(f"angle bin {angle_bin} out of range 0..{ANGLE_BINS - 1}")
        new.angle_onehot = np.zeros(ANGLE_BINS)
        new.angle_onehot[angle_bin] = 1.0
    return new
