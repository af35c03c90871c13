"""Metrics and experiment harnesses.

- one-vs-rest AUC (rank formulation, ties at half credit)
- Euclidean landing error (mean and population standard deviation, meters)
- chronological replay evaluation over a test split
- a physics reference predictor (parabolic extrapolation of the incoming ball)
- the opponent-flip probe against the synthetic ground-truth policies
- the ablation suite over all seven training variants
- one-at-a-time hyperparameter sweeps with per-epoch wall-clock
- episodic-memory activation traces (leaf level or extracted top levels)
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import VARIANTS, RunConfig, apply_variant
from .features import ShotContext, override_context
from .registry import SHOT_CLASS_ORDER, ModelRegistry, PredictionResult
from .synth import PlayerPolicy, ShotRecord, chronological_split, is_cross_court
from .training import LossReport, Trainer


# -- metric primitives ------------------------------------------------------------


def auc_binary(labels: np.ndarray, scores: np.ndarray) -> float | None:
    """Rank-based AUC with average ranks for ties; None if degenerate."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    if labels.size != scores.size:
        raise ValueError(f"labels ({labels.size}) and scores ({scores.size}) differ")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(labels.size)
    sorted_scores = scores[order]
    i = 0
    while i < labels.size:
        j = i
        while j + 1 < labels.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = ranks[labels].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_ovr(labels, scores) -> dict[str, float | None]:
    """One-vs-rest AUC per shot class; ``scores`` rows are 3-simplex vectors."""
    labels = list(labels)
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[0] != len(labels):
        raise ValueError(
            f"scores shape {scores.shape} does not pair with {len(labels)} labels")
    out: dict[str, float | None] = {}
    for idx, cls in enumerate(SHOT_CLASS_ORDER):
        mask = np.array([lab == cls for lab in labels])
        out[cls] = auc_binary(mask, scores[:, idx])
    return out


def macro_auc(per_class: dict[str, float | None]) -> float | None:
    vals = [v for v in per_class.values() if v is not None]
    return float(np.mean(vals)) if vals else None


def location_error(predictions, truths) -> tuple[float, float]:
    """Euclidean distances in meters: (mean, population standard deviation)."""
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if predictions.size == 0:
        raise ValueError("location_error over empty input")
    if predictions.shape != truths.shape:
        raise ValueError(
            f"prediction shape {predictions.shape} != truth shape {truths.shape}")
    dists = np.hypot(predictions[:, 0] - truths[:, 0], predictions[:, 1] - truths[:, 1])
    return float(dists.mean()), float(dists.std())


# -- physics reference --------------------------------------------------------------


def reference_landing(context: ShotContext, record_geo_next=None,
                      ball_xy_zt=None, gravity: float = 9.81) -> tuple[float, float]:
    """Parabolic extrapolation of the incoming ball to its next ground contact."""
    traj = ball_xy_zt
    if traj is None:
        raise ValueError("reference_landing needs the normalized incoming trajectory")
    (x0, y0, z0, t0), (x1, y1, z1, t1) = traj[-2], traj[-1]
    dt = max((t1 - t0) / 1000.0, 1e-3)
    vx, vy, vz = (x1 - x0) / dt, (y1 - y0) / dt, (z1 - z0) / dt
    disc = vz * vz + 2.0 * gravity * max(z1, 0.0)
    t_land = (vz + np.sqrt(disc)) / gravity
    x = float(np.clip(x1 + vx * t_land, -2.0, 25.77))
    y = float(np.clip(y1 + vy * t_land, -2.0, 12.97))
    return x, y


# -- replay evaluation -----------------------------------------------------------------


@dataclass
class EvalReport:
    auc_per_class: dict[str, float | None]
    auc_macro: float | None
    mu: float
    sigma: float
    per_player: dict[str, dict]
    n_shots: int
    reference_mu: float | None = None
    reference_sigma: float | None = None
    config: dict | None = None
    runtime_s: float | None = None

    def to_json(self) -> dict:
        return {
            "auc_per_class": self.auc_per_class,
            "auc_macro": self.auc_macro,
            "location_mu_m": self.mu,
            "location_sigma_m": self.sigma,
            "per_player": self.per_player,
            "n_shots": self.n_shots,
            "reference_mu_m": self.reference_mu,
            "reference_sigma_m": self.reference_sigma,
            "runtime_s": self.runtime_s,
        }


def replay_evaluate(registry: ModelRegistry, records: list[ShotRecord],
                    with_reference: bool = True) -> EvalReport:
    """Replay ``records`` chronologically, scoring each shot before consuming it.

    Prediction happens with memories as of the previous shot (the read precedes
    the append inside replay mode), so there is no target leakage.
    """
    from .features import normalized_geometry

    started = time.perf_counter()
    records = sorted(records, key=lambda r: r.ts)
    labels: list[str] = []
    probs: list[np.ndarray] = []
    predicted: list[tuple[float, float]] = []
    truth: list[tuple[float, float]] = []
    reference: list[tuple[float, float]] = []
    by_player: dict[str, dict[str, list]] = {}
    for record in records:
        ctx = registry.context_from_record(record)
        result = registry.predict_next_shot(record.receiver, ctx, mode="replay")
        if ctx.target_landing is None:
            continue
        labels.append(record.shot_type)
        probs.append(result.shot_type_probs)
        predicted.append(result.landing_m)
        truth.append(ctx.target_landing)
        slot = by_player.setdefault(record.receiver,
                                    {"labels": [], "probs": [], "pred": [], "truth": []})
        slot["labels"].append(record.shot_type)
        slot["probs"].append(result.shot_type_probs)
        slot["pred"].append(result.landing_m)
        slot["truth"].append(ctx.target_landing)
        if with_reference:
            geo = normalized_geometry(record)
            reference.append(reference_landing(ctx, ball_xy_zt=geo["ball"]))

    mu, sigma = location_error(predicted, truth)
    per_class = auc_ovr(labels, probs)
    per_player = {}
    for player, slot in sorted(by_player.items()):
        p_mu, p_sigma = location_error(slot["pred"], slot["truth"])
        p_auc = auc_ovr(slot["labels"], slot["probs"])
        per_player[player] = {"mu": p_mu, "sigma": p_sigma,
                              "auc_per_class": p_auc, "auc_macro": macro_auc(p_auc),
                              "n": len(slot["labels"])}
    ref_mu = ref_sigma = None
    if with_reference and reference:
        ref_mu, ref_sigma = location_error(reference, truth)
    return EvalReport(auc_per_class=per_class, auc_macro=macro_auc(per_class),
                      mu=mu, sigma=sigma, per_player=per_player,
                      n_shots=len(labels), reference_mu=ref_mu,
                      reference_sigma=ref_sigma,
                      runtime_s=time.perf_counter() - started)


# -- opponent-flip probe ------------------------------------------------------------------


def opponent_probe(registry: ModelRegistry, records: list[ShotRecord],
                   policies: dict[str, PlayerPolicy], opponents: list[str],
                   n_probes: int = 100, seed: int = 0) -> dict:
    """Flip the opponent id on held-out contexts and score side agreement.

    For each probe the expected side comes from the receiver's ground-truth
    policy for the *overridden* opponent; agreement means the decoded landing
    falls on that side of the court's long centerline.
    """
    from .features import normalized_geometry

    rng = np.random.default_rng(seed)
    tracked = [r for r in records if r.receiver in policies
               and policies[r.receiver].opponent_bias]
    if not tracked:
        raise ValueError("no records from players with opponent-conditional policies")
    picks = rng.choice(len(tracked), size=min(n_probes, len(tracked)), replace=False)
    agree = 0
    total = 0
    rows = []
    for pick in picks:
        record = tracked[int(pick)]
        ctx = registry.context_from_record(record, with_target=False)
        geo = normalized_geometry(record)
        reception_y = geo["ball"][-1][1]
        opponent = opponents[int(rng.integers(0, len(opponents)))]
        probe_ctx = override_context(ctx, registry.directory, opponent=opponent)
        result = registry.predict_next_shot(record.receiver, probe_ctx, mode="query",
                                            noise_seed=int(rng.integers(0, 2**31)))
        w_cross, _ = policies[record.receiver].bias_for(opponent)
        expect_cross = w_cross >= 0.5
        got_cross = is_cross_court(reception_y, result.landing_m[1])
        ok = bool(got_cross == expect_cross)
        agree += ok
        total += 1
        rows.append({"receiver": record.receiver, "opponent": opponent,
                     "expect_cross": expect_cross, "got_cross": got_cross,
                     "landing": result.landing_m, "agrees": ok})
    return {"agreement": agree / total, "n": total, "rows": rows}


# -- ablation suite ------------------------------------------------------------------------


@dataclass
class AblationRow:
    variant: str
    mu_per_seed: list[float]
    auc_per_seed: list[float | None]
    median_mu: float
    median_auc: float | None

    def as_dict(self) -> dict:
        return {"variant": self.variant, "median_mu": self.median_mu,
                "median_auc": self.median_auc,
                "mu_per_seed": self.mu_per_seed, "auc_per_seed": self.auc_per_seed}


def train_and_evaluate(config: RunConfig, records: list[ShotRecord],
                       log=None) -> tuple[ModelRegistry, EvalReport, LossReport]:
    """Train one configuration on the chronological split and score the test part."""
    train, test, _val = chronological_split(records)
    registry = ModelRegistry(config)
    trainer = Trainer(registry, config)
    loss_report = trainer.fit(train, log=log)
    report = replay_evaluate(registry, test)
    report.config = config.to_dict()
    return registry, report, loss_report


def run_ablation_suite(records: list[ShotRecord], base: RunConfig,
                       seeds: tuple[int, ...] = (0, 1, 2), log=None) -> list[AblationRow]:
    """Train all seven variants over a common seed set; medians per variant."""
    rows = []
    for variant in VARIANTS:
        mus: list[float] = []
        aucs: list[float | None] = []
        for seed in seeds:
            config = apply_variant(replace(base, seed=seed), variant)
            try:
                _, report, _ = train_and_evaluate(config, records, log=None)
            except Exception as exc:
                raise RuntimeError(f"ablation variant {variant!r} (seed {seed}) "
                                   f"failed: {exc}") from exc
            mus.append(report.mu)
            aucs.append(report.auc_macro)
            if log:
                log(f"[ablate] {variant} seed {seed}: mu={report.mu:.3f} "
                    f"auc={report.auc_macro}")
        clean_aucs = [a for a in aucs if a is not None]
        rows.append(AblationRow(
            variant=variant, mu_per_seed=mus, auc_per_seed=aucs,
            median_mu=float(np.median(mus)),
            median_auc=float(np.median(clean_aucs)) if clean_aucs else None))
    return rows


def write_ablation_csv(rows: list[AblationRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "median_mu_m", "median_macro_auc",
                         "mu_per_seed", "auc_per_seed"])
        for row in rows:
            writer.writerow([row.variant, f"{row.median_mu:.4f}",
                             "" if row.median_auc is None else f"{row.median_auc:.4f}",
                             json.dumps(row.mu_per_seed),
                             json.dumps(row.auc_per_seed)])


# -- sweeps ------------------------------------------------------------------------------


SWEEPABLE = {
    "N": "em_capacity",
    "l": "em_depth",
    "b": "sm_slots",
    "image_size": "image_size",
    "train_fraction": None,        # handled specially
    "lambda_eta": "lambda_eta",
}


@dataclass
class SweepRow:
    parameter: str
    value: float
    mu: float
    sigma: float
    auc_macro: float | None
    epoch_wallclock_s: float
    total_wallclock_s: float

    def as_dict(self) -> dict:
        return {"parameter": self.parameter, "value": self.value, "mu": self.mu,
                "sigma": self.sigma, "auc_macro": self.auc_macro,
                "epoch_wallclock_s": self.epoch_wallclock_s,
                "total_wallclock_s": self.total_wallclock_s}


def _validate_sweep(parameter: str, values) -> None:
    if parameter not in SWEEPABLE:
        raise ValueError(
            f"unknown sweep parameter {parameter!r}; valid: {sorted(SWEEPABLE)}")
    for v in values:
        if parameter == "train_fraction" and not (0.0 < v <= 1.0):
            raise ValueError(f"train_fraction value {v} outside (0, 1]")
        if parameter in ("N", "l", "b", "image_size") and int(v) < 1:
            raise ValueError(f"{parameter} value {v} must be a positive integer")
        if parameter == "image_size" and (int(v) & (int(v) - 1) or int(v) < 4):
            raise ValueError(f"image_size value {v} must be a power of two >= 4")
        if parameter == "lambda_eta" and v < 0:
            raise ValueError(f"lambda_eta value {v} must be >= 0")


def sweep(parameter: str, values, records: list[ShotRecord], base: RunConfig,
          log=None) -> list[SweepRow]:
    """One-at-a-time sweep: train/evaluate per value, all else held fixed."""
    _validate_sweep(parameter, values)
    rows = []
    for value in values:
        config = base
        train_records = records
        if parameter == "train_fraction":
            train, test, _ = chronological_split(records)
            keep = max(1, int(len(train) * float(value)))
            train_records = sorted(train, key=lambda r: r.ts)[:keep] + test
        else:
            config = replace(base, **{SWEEPABLE[parameter]: type(
                getattr(base, SWEEPABLE[parameter]))(value)})
        config = apply_variant(config)
        started = time.perf_counter()
        _, report, loss_report = train_and_evaluate(config, train_records)
        total = time.perf_counter() - started
        epoch_times = list(loss_report.epoch_seconds.values())
        mean_epoch = float(np.mean(epoch_times)) if epoch_times \
            else total / max(len(loss_report.epochs()), 1)
        rows.append(SweepRow(parameter=parameter, value=float(value), mu=report.mu,
                             sigma=report.sigma, auc_macro=report.auc_macro,
                             epoch_wallclock_s=mean_epoch,
                             total_wallclock_s=total))
        if log:
            log(f"[sweep] {parameter}={value}: mu={report.mu:.3f} "
                f"epoch={rows[-1].epoch_wallclock_s:.1f}s")
    return rows


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["parameter", "value", "mu", "sigma",
                                                "auc_macro", "epoch_wallclock_s",
                                                "total_wallclock_s"])
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_dict())


# -- memory activation traces ---------------------------------------------------------------


@dataclass
class TraceRow:
    slot: int
    level: str
    weight: float
    timestamp: int | None
    meta: dict = field(default_factory=dict)


def memory_activation_trace(registry: ModelRegistry, player_id: str,
                            shot: ShotContext, level: str = "leaf") -> list[TraceRow]:
    """Attention of the probe shot against the player's episodic memory.

    ``level='leaf'`` scores every stored embedding (one row per queue slot,
    aligned to timestamps); ``level='top'`` scores the extracted top levels of
    the summary tree (rows reference the leaf span each node summarizes).
    """
    if level not in ("leaf", "top"):
        raise ValueError(f"level must be 'leaf' or 'top', got {level!r}")
    model = registry.get_or_create_player(player_id)
    if model.em is None or len(model.em) == 0:
        raise ValueError(f"episodic memory for player {player_id!r} is empty")
    c = model.pn.forward(shot.perception.pixels[None], shot.sparse()[None],
                         train=False)[0]
    if level == "leaf":
        weights, entries = model.em.leaf_scores(c)
        return [TraceRow(slot=i, level="leaf", weight=float(w),
                         timestamp=entry.timestamp, meta=dict(entry.meta))
                for i, (w, entry) in enumerate(zip(weights, entries))]
    readout = model.em.read(c)
    rows = []
    em = model.em
    offset = 0
    for d in range(min(em.depth, em.n_levels)):
        h, _ = em.levels[em.n_levels - 1 - d]
        count = h.data.shape[0]
        span = em.leaf_count // count
        for idx in range(count):
            lo, hi = idx * span, min((idx + 1) * span, len(em.queue))
            timestamps = [e.timestamp for e in em.queue[lo:hi]]
            rows.append(TraceRow(
                slot=offset, level=f"depth{d + 1}",
                weight=float(readout.attention[offset]),
                timestamp=timestamps[-1] if timestamps else None,
                meta={"leaf_span": [lo, min((idx + 1) * span, em.leaf_count)],
                      "timestamps": timestamps}))
            offset += 1
    return rows
