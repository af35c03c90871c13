"""Synthetic tournament generator, dataset file I/O and chronological splits.

The generator replaces a proprietary ball/player tracking feed with a
schema-compatible source whose ground truth is *known by construction*:

- every tracked player follows an explicit :class:`PlayerPolicy` that mixes
  cross-court vs down-the-line return targets per opponent, so opponent
  adaptation is directly verifiable;
- the response type (winner / error / return) is drawn from probabilities
  driven by incoming speed and score lead, so shot-type classification has a
  clean, learnable signal;
- ball flight between contact points is a simple parabola sampled on a fixed
  clock - the learning target is the policy structure, not aerodynamics.

Records serialize as UTF-8 JSON lines (gzip accepted by ``.gz`` extension).
"""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .court import COURT_LENGTH_M, COURT_WIDTH_M

POINT_TOKENS = ["00", "15", "30", "40", "AD"]

SCHEMA_FIELDS = [
    "match_id", "rally_id", "ts", "hitter", "receiver", "ball_xyz_t",
    "hitter_feet", "receiver_feet", "speed_mps", "angle_deg", "score",
    "shot_type", "next_ball_xyz_t",
]

SHOT_TYPES = ("winner", "error", "return")


class DatasetError(ValueError):
    """Schema violation while reading a dataset file."""


@dataclass
class ShotRecord:
    match_id: str
    rally_id: int
    ts: int
    hitter: str
    receiver: str
    ball_xyz_t: list          # [[x, y, z, t_ms], ...] incoming, hit -> contact
    hitter_feet: list         # [[x, y], ...]
    receiver_feet: list
    speed_mps: float
    angle_deg: float
    score: str                # receiver-opponent, tokens 00/15/30/40/AD
    shot_type: str            # label of the receiver's response
    next_ball_xyz_t: list     # the response trajectory (ground truth)

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in SCHEMA_FIELDS}

    @classmethod
    def from_json(cls, obj: dict, line_no: int | None = None) -> "ShotRecord":
        where = f" (line {line_no})" if line_no is not None else ""
        for name in SCHEMA_FIELDS:
            if name not in obj:
                raise DatasetError(f"missing required field {name!r}{where}")
        if obj["shot_type"] not in SHOT_TYPES:
            raise DatasetError(
                f"invalid shot_type {obj['shot_type']!r}{where}; expected one of {SHOT_TYPES}")
        return cls(**{name: obj[name] for name in SCHEMA_FIELDS})

    def landing_point(self) -> tuple[float, float]:
        """Terminal (x, y) of the response trajectory."""
        last = self.next_ball_xyz_t[-1]
        return float(last[0]), float(last[1])


@dataclass
class PlayerPolicy:
    """Ground-truth return behaviour for one simulated player.

    ``opponent_bias`` maps opponent id -> (cross-court weight, down-the-line
    weight); the two weights must form a simplex.  ``aggression`` sets the
    baseline appetite for deep/wide targets; the current score lead moves it.
    """

    opponent_bias: dict = field(default_factory=dict)
    default_bias: tuple = (0.5, 0.5)
    aggression: float = 0.5
    noise_scale: float = 1.0
    home_y_offset: float = 0.0    # habitual ready-position offset (style cue)

    def validate(self) -> None:
        for opp, weights in {**self.opponent_bias, None: self.default_bias}.items():
            w = np.asarray(weights, dtype=float)
            if w.shape != (2,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError(
                    f"mixing weights {weights} for opponent {opp!r} are not a simplex")

    def bias_for(self, opponent: str) -> tuple:
        return tuple(self.opponent_bias.get(opponent, self.default_bias))


@dataclass
class LabelModel:
    """Response-type probabilities given incoming difficulty and score lead.

    Errors concentrate on fast incoming balls (difficulty above ``err_knee``),
    winners on slow balls taken by an aggressive receiver.  The knee/gain
    shapes keep the pooled class ratios near 9% / 18% / 73% while leaving the
    type strongly predictable from the observable context.
    """

    win_floor: float = 0.01
    win_gain: float = 1.56
    win_knee: float = 0.45
    err_floor: float = 0.015
    err_gain: float = 2.0
    err_knee: float = 0.6
    speed_lo: float = 18.0
    speed_hi: float = 42.0

    def difficulty(self, speed: float) -> float:
        return float(np.clip((speed - self.speed_lo) / (self.speed_hi - self.speed_lo),
                             0.0, 1.0))

    def probabilities(self, speed: float, aggression: float) -> tuple[float, float, float]:
        d = self.difficulty(speed)
        p_win = self.win_floor + self.win_gain * max(self.win_knee - d, 0.0) * aggression
        p_err = self.err_floor + self.err_gain * max(d - self.err_knee, 0.0)
        p_win = float(np.clip(p_win, 0.005, 0.9))
        p_err = float(np.clip(p_err, 0.005, 0.9))
        if p_win + p_err > 0.95:
            scale = 0.95 / (p_win + p_err)
            p_win, p_err = p_win * scale, p_err * scale
        return p_win, p_err, 1.0 - p_win - p_err


def is_cross_court(reception_y: float, landing_y: float,
                   width: float = COURT_WIDTH_M) -> bool:
    """True when the return crosses the court's long centerline."""
    mid = width / 2.0
    return (reception_y - mid) * (landing_y - mid) < 0


# -- flight sampling -----------------------------------------------------------------


def _round4(x: float) -> float:
    return round(float(x), 4)


def _parabola(p0, p1, z0: float, z1: float, speed: float, t0_ms: int,
              g: float = 9.81, dt_ms: int = 20) -> list:
    """Sample a parabolic flight from p0 (height z0) to p1 (height z1)."""
    dist = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    flight = max(dist / max(speed, 1.0), 0.05)
    vz0 = (z1 - z0 + 0.5 * g * flight * flight) / flight
    steps = max(int(flight * 1000 / dt_ms), 2)
    points = []
    for i in range(steps + 1):
        frac = i / steps
        t = frac * flight
        x = p0[0] + (p1[0] - p0[0]) * frac
        y = p0[1] + (p1[1] - p0[1]) * frac
        z = max(z0 + vz0 * t - 0.5 * g * t * t, 0.0)
        points.append([_round4(x), _round4(y), _round4(z), int(t0_ms + t * 1000)])
    return points


def _feet_track(rng: np.random.Generator, start, end, n: int = 4) -> list:
    track = []
    for i in range(n):
        frac = i / (n - 1)
        x = start[0] + (end[0] - start[0]) * frac + rng.normal(0, 0.08)
        y = start[1] + (end[1] - start[1]) * frac + rng.normal(0, 0.08)
        track.append([_round4(x), _round4(y)])
    return track


# -- score keeping --------------------------------------------------------------------


class _GameScore:
    def __init__(self):
        self.points = {0: 0, 1: 0}   # indices into POINT_TOKENS

    def token(self, side: int) -> str:
        return POINT_TOKENS[self.points[side]]

    def award(self, winner_side: int) -> None:
        loser = 1 - winner_side
        w, l = self.points[winner_side], self.points[loser]
        if w == 4:                       # AD in, game
            self.points = {0: 0, 1: 0}
        elif l == 4:                     # AD out, back to deuce
            self.points[loser] = 3
        elif w == 3 and l == 3:          # deuce -> AD
            self.points[winner_side] = 4
        elif w == 3:                     # game
            self.points = {0: 0, 1: 0}
        else:
            self.points[winner_side] = w + 1

    def lead(self, side: int) -> int:
        return self.points[side] - self.points[1 - side]


# -- tournament simulation ---------------------------------------------------------------


@dataclass
class _MatchState:
    match_id: str
    players: tuple[str, str]       # (side 0 at x=0, side 1 at x=L)
    score: _GameScore = field(default_factory=_GameScore)
    server: int = 0


def _home_position(side: int, y_offset: float) -> tuple[float, float]:
    x = 1.0 if side == 0 else COURT_LENGTH_M - 1.0
    return (x, COURT_WIDTH_M / 2.0 + y_offset)


def _reception_third(rng: np.random.Generator) -> float:
    """Pick a y in one of the outer thirds, so cross vs line is unambiguous."""
    if rng.random() < 0.5:
        return float(rng.uniform(1.5, 3.3))
    return float(COURT_WIDTH_M - rng.uniform(1.5, 3.3))


def _response_target(policy: PlayerPolicy, opponent: str, reception: tuple[float, float],
                     receiver_side: int, lead: int, shot_type: str,
                     rng: np.random.Generator) -> tuple[float, float]:
    w_cross, _ = policy.bias_for(opponent)
    go_cross = rng.random() < w_cross
    y_mirror = COURT_WIDTH_M - reception[1]
    y_base = y_mirror if go_cross else reception[1]
    # aim at the corners, never the middle: keep the target clear of the
    # centerline so the intended side survives the target noise
    mid = COURT_WIDTH_M / 2.0
    offset = y_base - mid
    sign = 1.0 if offset >= 0 else -1.0
    y_base = mid + sign * max(abs(offset), 2.2)
    aggr = float(np.clip(policy.aggression + 0.12 * lead, 0.0, 1.0))
    depth = 2.0 + (1.0 - aggr) * 3.0          # meters from the far baseline
    x_base = depth if receiver_side == 1 else COURT_LENGTH_M - depth
    x = x_base + rng.normal(0, policy.noise_scale)
    y = y_base + rng.normal(0, policy.noise_scale)
    if shot_type == "error":
        # push the terminal point out of court (wide or long, never into play)
        if rng.random() < 0.5:
            y = -rng.uniform(0.3, 1.5) if y_base < COURT_WIDTH_M / 2 \
                else COURT_WIDTH_M + rng.uniform(0.3, 1.5)
        else:
            x = -rng.uniform(0.3, 1.5) if receiver_side == 1 \
                else COURT_LENGTH_M + rng.uniform(0.3, 1.5)
    return (float(x), float(y))


def generate_tournament(seed: int, policies: dict[str, PlayerPolicy], n_shots: int,
                        tracked: list[str] | None = None,
                        label_model: LabelModel | None = None) -> list[ShotRecord]:
    """Simulate rallies until ``n_shots`` records (shots to tracked receivers).

    ``policies`` maps every participating player id to its policy; ``tracked``
    names the receivers whose shots are emitted (default: every player).
    Pairings cycle round-robin over (tracked x non-tracked) opponents, or over
    all ordered pairs when everyone is tracked.
    """
    if len(policies) < 2:
        raise ValueError("need at least two player policies")
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    for policy in policies.values():
        policy.validate()
    label_model = label_model or LabelModel()
    tracked_set = set(tracked) if tracked is not None else set(policies)
    others = [p for p in policies if p not in tracked_set]
    pairings = []
    for a in sorted(tracked_set):
        for b in (sorted(others) if others else sorted(set(policies) - {a})):
            pairings.append((a, b))
    if not pairings:
        raise ValueError("no valid pairings between tracked players and opponents")

    rng = np.random.default_rng(seed)
    matches = {pair: _MatchState(match_id=f"{pair[0]}_vs_{pair[1]}", players=pair)
               for pair in pairings}
    records: list[ShotRecord] = []
    ts = 0
    rally_id = 0
    pair_idx = 0

    while len(records) < n_shots:
        pair = pairings[pair_idx % len(pairings)]
        pair_idx += 1
        match = matches[pair]
        rally_id += 1
        match.server = 1 - match.server
        hitter_side = match.server

        # serve: aimed into an outer third on the receiver's side
        receiver_side = 1 - hitter_side
        hitter_id = match.players[hitter_side]
        hitter_pos = _home_position(hitter_side, policies[hitter_id].home_y_offset)
        reception_y = _reception_third(rng)
        reception_x = (COURT_LENGTH_M - 4.0) if receiver_side == 1 else 4.0
        incoming_target = (reception_x, reception_y)
        incoming_speed = float(rng.uniform(label_model.speed_lo, label_model.speed_hi))

        for _shot in range(60):                      # hard cap per rally
            receiver_side = 1 - hitter_side
            hitter_id = match.players[hitter_side]
            receiver_id = match.players[receiver_side]
            receiver_policy = policies[receiver_id]

            # contact sits just past the bounce along the flight direction
            contact = (incoming_target[0] + (1.2 if receiver_side == 1 else -1.2),
                       incoming_target[1] + float(rng.normal(0, 0.15)))
            ball = _parabola(hitter_pos, incoming_target, 1.2, 0.0, incoming_speed,
                             t0_ms=ts * 1000)
            rise = _parabola(incoming_target, contact, 0.0, 1.0, incoming_speed * 0.6,
                             t0_ms=ball[-1][3])
            incoming_traj = ball + rise[1:]

            lead = match.score.lead(receiver_side)
            aggr = float(np.clip(receiver_policy.aggression + 0.12 * lead, 0.0, 1.0))
            p_win, p_err, _ = label_model.probabilities(incoming_speed, aggr)
            draw = rng.random()
            shot_type = ("winner" if draw < p_win
                         else "error" if draw < p_win + p_err else "return")

            response_speed = float(rng.uniform(label_model.speed_lo, label_model.speed_hi))
            target = _response_target(receiver_policy, hitter_id, contact,
                                      receiver_side, lead, shot_type, rng)
            response_traj = _parabola(contact, target, 1.0, 0.0, response_speed,
                                      t0_ms=incoming_traj[-1][3])

            if receiver_id in tracked_set:
                recv_home = _home_position(receiver_side, receiver_policy.home_y_offset)
                seg = np.array(incoming_traj[-1][:2]) - np.array(incoming_traj[-2][:2])
                angle = math.degrees(math.atan2(seg[1], seg[0]))
                records.append(ShotRecord(
                    match_id=match.match_id,
                    rally_id=rally_id,
                    ts=ts,
                    hitter=hitter_id,
                    receiver=receiver_id,
                    ball_xyz_t=incoming_traj,
                    hitter_feet=_feet_track(rng, hitter_pos, hitter_pos),
                    receiver_feet=_feet_track(rng, recv_home, contact),
                    speed_mps=round(incoming_speed, 3),
                    angle_deg=round(angle, 3),
                    score=f"{match.score.token(receiver_side)}-"
                          f"{match.score.token(hitter_side)}",
                    shot_type=shot_type,
                    next_ball_xyz_t=response_traj,
                ))
                ts += 1
                if len(records) >= n_shots:
                    return records

            if shot_type == "winner":
                match.score.award(receiver_side)
                break
            if shot_type == "error":
                match.score.award(hitter_side)
                break

            # rally continues: the response becomes the next incoming shot
            hitter_side = receiver_side
            hitter_pos = contact
            incoming_target = target
            incoming_speed = response_speed
        else:
            match.score.award(int(rng.integers(0, 2)))

    return records


def default_policies() -> tuple[dict[str, PlayerPolicy], list[str]]:
    """Two tracked players with anti-symmetric per-opponent policies.

    P1 goes cross-court against O1 and down the line against O2; P2 does the
    opposite.  A model without per-player structure sees the opponent id carry
    no marginal information about the side.
    """
    policies = {
        "P1": PlayerPolicy(opponent_bias={"O1": (0.95, 0.05), "O2": (0.05, 0.95)},
                           aggression=0.5, noise_scale=0.45, home_y_offset=-1.2),
        "P2": PlayerPolicy(opponent_bias={"O1": (0.05, 0.95), "O2": (0.95, 0.05)},
                           aggression=0.5, noise_scale=0.45, home_y_offset=1.2),
        "O1": PlayerPolicy(aggression=0.5, noise_scale=1.2),
        "O2": PlayerPolicy(aggression=0.5, noise_scale=1.2),
    }
    return policies, ["P1", "P2"]


# -- file I/O --------------------------------------------------------------------------


def _open_for(path: Path, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_dataset(path, records: list[ShotRecord]) -> None:
    path = Path(path)
    with _open_for(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), separators=(",", ":")) + "\n")


def load_dataset(path) -> list[ShotRecord]:
    path = Path(path)
    records = []
    with _open_for(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON on line {line_no}: {exc}") from exc
            records.append(ShotRecord.from_json(obj, line_no))
    return records


# -- splitting --------------------------------------------------------------------------


def _apportion(n: int, fractions: tuple[float, ...]) -> list[int]:
    """Largest-remainder apportionment; ties break toward earlier entries."""
    raw = [n * f for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    remainder = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def chronological_split(records: list[ShotRecord],
                        fractions: tuple[float, float, float] = (0.70, 0.25, 0.05)
                        ) -> tuple[list[ShotRecord], list[ShotRecord], list[ShotRecord]]:
    """Per-player chronological partition into (train, test, validation)."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions {fractions} do not sum to 1")
    by_player: dict[str, list[ShotRecord]] = {}
    for record in records:
        by_player.setdefault(record.receiver, []).append(record)
    splits: tuple[list, list, list] = ([], [], [])
    for player in sorted(by_player):
        shots = sorted(by_player[player], key=lambda r: r.ts)
        n_train, n_test, n_val = _apportion(len(shots), fractions)
        splits[0].extend(shots[:n_train])
        splits[1].extend(shots[n_train:n_train + n_test])
        splits[2].extend(shots[n_train + n_test:])
    for part in splits:
        part.sort(key=lambda r: r.ts)
    return splits
