"""Semi-supervised adversarial training loop.

Per batch (chronological): the perception encoders embed every shot, the
memory reads/appends run shot by shot in timestamp order (episodic append and
semantic write once per shot), the generator decodes the batch, then one
discriminator step and one generator step run back to back.  Gradients flow
through the memory read paths; the tape is truncated at batch boundaries
(memory state carries over as constants).

Loss forms
----------
- discriminator: ``-log D(x, y_real) - log(1 - D(x, y_fake))`` plus
  ``lambda_eta`` times the shot-type cross entropy on labeled real shots;
- generator: non-saturating ``-log D(x, y_fake)`` plus a weighted per-pixel
  reconstruction term (cross entropy on the map logits); the supervised-only
  ablation trains on the reconstruction term alone.

Memories are rebuilt from scratch at the start of every epoch so each epoch
replays the same chronology.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .features import ShotContext
from .nn import tensor as T
from .nn.optim import Adam, LrSchedule
from .nn.tensor import Tensor
from .registry import SHOT_CLASS_ORDER, ModelRegistry
from .synth import ShotRecord


class TrainingDiverged(RuntimeError):
    """A loss went non-finite; carries the offending batch diagnostics."""


@dataclass
class LossRow:
    epoch: int
    batch: int
    d_adv: float | None
    g_adv: float | None
    supervised: float | None
    total: float

    def as_dict(self) -> dict:
        return {"epoch": self.epoch, "batch": self.batch, "d_adv": self.d_adv,
                "g_adv": self.g_adv, "supervised": self.supervised, "total": self.total}


@dataclass
class LossReport:
    rows: list[LossRow] = field(default_factory=list)
    epoch_seconds: dict[int, float] = field(default_factory=dict)

    def epoch_mean(self, epoch: int, key: str) -> float | None:
        vals = [getattr(r, key) for r in self.rows if r.epoch == epoch
                and getattr(r, key) is not None]
        return float(np.mean(vals)) if vals else None

    def epochs(self) -> list[int]:
        return sorted({r.epoch for r in self.rows})

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["epoch", "batch", "d_adv", "g_adv",
                                                    "supervised", "total"])
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row.as_dict())

    def curve_signature(self) -> tuple:
        return tuple((r.epoch, r.batch, r.d_adv, r.g_adv, r.supervised, r.total)
                     for r in self.rows)


# -- loss primitives ---------------------------------------------------------------


def adversarial_d_loss(real_logits, fake_logits) -> Tensor:
    """Mean of -log sigma(real) - log(1 - sigma(fake))."""
    real_term = T.neg(T.log_sigmoid(real_logits))
    fake_term = T.softplus(fake_logits)          # -log(1 - sigma(x)) = softplus(x)
    return T.tmean(real_term) + T.tmean(fake_term)


def adversarial_g_loss(fake_logits) -> Tensor:
    """Non-saturating generator loss: mean of -log sigma(fake)."""
    return T.tmean(T.neg(T.log_sigmoid(fake_logits)))


def classification_loss(cls_logits, label_indices) -> Tensor:
    """Mean cross entropy of the shot-type head over labeled rows."""
    labels = np.asarray(label_indices, dtype=int)
    if labels.size == 0:
        raise ValueError("classification loss over an empty label set")
    logp = T.log_softmax(cls_logits)
    picked = logp[np.arange(labels.size), labels]
    return T.neg(T.tmean(picked))


def pixel_bce_loss(fake_logits, real_maps) -> Tensor:
    """Per-pixel cross entropy against soft targets, computed on logits.

    softplus(z) - z * t == -t*log(sigma(z)) - (1-t)*log(1-sigma(z)); the
    gradient is sigma(z) - t, so a mostly-empty target cannot saturate the
    output nonlinearity the way a plain pixel distance through it does.
    """
    t = T.as_tensor(real_maps)
    return T.tmean(T.softplus(fake_logits) - fake_logits * t)


def label_index(label: str) -> int:
    return SHOT_CLASS_ORDER.index(label)


# -- batch assembly ----------------------------------------------------------------


@dataclass
class PreparedShot:
    context: ShotContext
    image: np.ndarray          # float32 (S, S, 3)
    sparse: np.ndarray         # float32 (D,)
    target: np.ndarray         # float32 (S, S)
    label: int | None          # index into SHOT_CLASS_ORDER, None if unlabeled
    receiver: str
    timestamp: int


class Trainer:
    def __init__(self, registry: ModelRegistry, config: RunConfig | None = None):
        self.registry = registry
        self.config = config or registry.config
        self.schedule = LrSchedule(self.config.epochs_phase1, self.config.lr1,
                                   self.config.epochs_phase2, self.config.lr2)
        self.rng = np.random.default_rng(self.config.seed + 0x5EED)
        self.opt_g: Adam | None = None
        self.opt_d: Adam | None = None
        self.opt_d_cls: Adam | None = None
        self._sm_initial = (self.registry.sm.state()
                            if self.registry.sm is not None else None)

    # -- data preparation ------------------------------------------------------------

    def prepare(self, records: list[ShotRecord]) -> list[PreparedShot]:
        """Featurize records and materialize every player model."""
        records = sorted(records, key=lambda r: r.ts)
        label_rng = np.random.default_rng(self.config.seed + 0x1ABE1)
        prepared = []
        for record in records:
            self.registry.get_or_create_player(record.receiver)
            ctx = self.registry.context_from_record(record)
            labeled = label_rng.random() < self.config.label_fraction
            prepared.append(PreparedShot(
                context=ctx,
                image=ctx.perception.pixels.astype(np.float32),
                sparse=ctx.sparse().astype(np.float32),
                target=ctx.target_map.pixels.astype(np.float32),
                label=label_index(ctx.shot_type_label)
                if (labeled and ctx.shot_type_label) else None,
                receiver=record.receiver,
                timestamp=record.ts,
            ))
        self._build_optimizers()
        return prepared

    def _build_optimizers(self) -> None:
        gen = self.registry.generator_params()
        self.opt_g = Adam(gen)
        if self.registry.disc is not None:
            # the adversarial path trains throttled (d_lr_scale); the
            # shot-type path keeps the full schedule rate
            self.opt_d = Adam(self.registry.disc.adversarial_params())
            self.opt_d_cls = Adam(self.registry.disc.classifier_params())

    def reset_memories(self) -> None:
        for model in self.registry.players.values():
            if model.em is not None:
                model.em.clear()
            model.last_seen = {}
        if self.registry.sm is not None and self._sm_initial is not None:
            self.registry.sm.load_state(self._sm_initial)

    # -- forward -----------------------------------------------------------------------

    def _generator_forward(self, batch: list[PreparedShot], train: bool,
                           advance_memory: bool) -> dict:
        """Run PN + memories + RGN over a chronological batch.

        Returns per-batch tensors; when ``advance_memory`` the episodic queues
        and the semantic matrix advance once per shot, in order, on the tape.
        """
        registry = self.registry
        config = self.config
        by_player: dict[str, list[int]] = {}
        for i, shot in enumerate(batch):
            by_player.setdefault(shot.receiver, []).append(i)

        n = len(batch)
        images = np.stack([s.image for s in batch]).astype(np.float64)
        sparse = np.stack([s.sparse for s in batch]).astype(np.float64)

        contexts: list[Tensor | None] = [None] * n
        for player_id, idxs in by_player.items():
            model = registry.get_or_create_player(player_id)
            c = model.pn.forward(images[idxs], sparse[idxs], train=train, rng=self.rng)
            for row, i in enumerate(idxs):
                contexts[i] = c[row]

        conds: list[Tensor | None] = [None] * n
        z = self.rng.standard_normal((n, config.noise_dim))
        for i, shot in enumerate(batch):
            model = registry.get_or_create_player(shot.receiver)
            c_i = contexts[i]
            parts = [c_i]
            m_em = None
            if model.em is not None:
                readout = model.em.read(c_i)
                m_em = readout.m
                if not config.grad_through_reads:
                    m_em = m_em.detach()
                parts.append(m_em)
            if registry.sm is not None:
                m_sm, _, _ = registry.sm.read(c_i)
                if not config.grad_through_reads:
                    m_sm = m_sm.detach()
                parts.append(m_sm)
            parts.append(Tensor(sparse[i]))
            parts.append(Tensor(z[i]))
            conds[i] = T.reshape(T.concat(parts, axis=0), (1, registry.net_config.cond_dim))
            if advance_memory:
                if model.em is not None:
                    model.em.append(c_i, shot.timestamp, meta=shot.context.meta)
                if registry.sm is not None:
                    registry.sm.write(m_em if m_em is not None else c_i)
                model.note_ts(shot.receiver, shot.timestamp)

        fakes: list[Tensor | None] = [None] * n
        fake_logits: list[Tensor | None] = [None] * n
        for player_id, idxs in by_player.items():
            model = registry.get_or_create_player(player_id)
            cond = T.concat([conds[i] for i in idxs], axis=0)
            y, logits = model.rgn.forward(cond, train=train, rng=self.rng,
                                          with_logits=True)
            for row, i in enumerate(idxs):
                fakes[i] = y[row:row + 1]
                fake_logits[i] = logits[row:row + 1]
        y_fake = T.concat(fakes, axis=0)
        y_logits = T.concat(fake_logits, axis=0)
        return {"images": images, "sparse": sparse, "y_fake": y_fake,
                "y_logits": y_logits}

    def _detach_memories(self) -> None:
        for model in self.registry.players.values():
            if model.em is not None:
                model.em.detach_state()
        if self.registry.sm is not None:
            self.registry.sm.detach_state()

    # -- losses --------------------------------------------------------------------------

    def compute_losses(self, batch: list[PreparedShot], train: bool = True,
                       advance_memory: bool = True) -> dict:
        """Forward passes and loss tensors for one batch (no optimizer steps)."""
        if not batch:
            raise ValueError("empty batch")
        registry = self.registry
        out = self._generator_forward(batch, train=train, advance_memory=advance_memory)
        images, sparse, y_fake = out["images"], out["sparse"], out["y_fake"]
        y_logits = out["y_logits"]
        targets = np.stack([s.target for s in batch]).astype(np.float64)[..., None]
        labeled = [(i, s.label) for i, s in enumerate(batch) if s.label is not None]
        losses: dict = {"y_fake": y_fake, "d_loss": None, "g_loss": None,
                        "d_adv": None, "g_adv": None, "supervised": None}

        if registry.disc is not None:
            # one discriminator pass over real rows stacked with detached fakes
            n = len(batch)
            both_logits, both_cls = registry.disc.forward(
                np.concatenate([images, images]),
                T.concat([Tensor(targets), y_fake.detach()], axis=0),
                np.concatenate([sparse, sparse]),
                train=train, rng=self.rng)
            real_logits, fake_logits_d = both_logits[:n], both_logits[n:]
            cls_logits = both_cls[:n]
            d_adv = adversarial_d_loss(real_logits, fake_logits_d)
            d_loss = d_adv
            if labeled and self.config.lambda_eta > 0:
                idxs = [i for i, _ in labeled]
                sup = classification_loss(cls_logits[idxs], [l for _, l in labeled])
                d_loss = d_loss + Tensor(np.float64(self.config.lambda_eta)) * sup
                losses["supervised"] = sup
            losses["d_adv"] = d_adv
            losses["d_loss"] = d_loss

            fake_logits_g, _ = registry.disc.forward(
                images, y_fake, sparse, train=train, rng=self.rng)
            g_adv = adversarial_g_loss(fake_logits_g)
            g_loss = g_adv
            if self.config.recon_weight > 0:
                g_loss = g_loss + Tensor(np.float64(self.config.recon_weight)) \
                    * pixel_bce_loss(y_logits, targets)
            losses["g_adv"] = g_adv
            losses["g_loss"] = g_loss
        else:
            losses["g_loss"] = pixel_bce_loss(y_logits, targets) \
                * Tensor(np.float64(self.config.recon_weight or 1.0))
        return losses

    # -- optimization -----------------------------------------------------------------------

    def _zero_all(self) -> None:
        if self.opt_g:
            self.opt_g.zero_grad()
        if self.opt_d:
            self.opt_d.zero_grad()
        if self.opt_d_cls:
            self.opt_d_cls.zero_grad()

    def train_batch(self, batch: list[PreparedShot], lr: float, epoch: int,
                    batch_no: int) -> LossRow:
        losses = self.compute_losses(batch, train=True, advance_memory=True)
        diagnostics = {"epoch": epoch, "batch": batch_no,
                       "timestamps": [s.timestamp for s in batch]}

        if losses["d_loss"] is not None:
            self._zero_all()
            losses["d_loss"].backward()
            self._check_finite(losses, ("d_adv", "supervised"), diagnostics)
            self.opt_d.step(lr * self.config.d_lr_scale)
            self.opt_d_cls.step(lr)

        self._zero_all()
        losses["g_loss"].backward()
        self._check_finite(losses, ("g_loss", "g_adv"), diagnostics)
        self.opt_g.step(lr)
        self._zero_all()
        self._detach_memories()

        def val(key):
            return float(losses[key].item()) if losses[key] is not None else None

        total = (val("d_loss") or 0.0) + (val("g_loss") or 0.0)
        return LossRow(epoch=epoch, batch=batch_no, d_adv=val("d_adv"),
                       g_adv=val("g_adv"), supervised=val("supervised"), total=total)

    def _check_finite(self, losses: dict, keys, diagnostics: dict) -> None:
        for key in keys:
            tensor = losses.get(key)
            if tensor is not None and not np.isfinite(tensor.item()):
                raise TrainingDiverged(
                    f"non-finite {key} at epoch {diagnostics['epoch']} batch "
                    f"{diagnostics['batch']}; components: "
                    + ", ".join(f"{k}={losses[k].item() if losses[k] is not None else None}"
                                for k in ("d_adv", "g_adv", "supervised", "g_loss")
                                if k in losses)
                    + f"; batch timestamps {diagnostics['timestamps']}")

    def train_epoch(self, prepared: list[PreparedShot], epoch: int,
                    report: LossReport | None = None) -> LossReport:
        """One pass over the chronology at the scheduled learning rate."""
        report = report if report is not None else LossReport()
        lr = self.schedule.lr_for_epoch(epoch)
        self.reset_memories()
        ordered = sorted(prepared, key=lambda s: s.timestamp)
        bs = self.config.batch_size
        for batch_no, lo in enumerate(range(0, len(ordered), bs)):
            batch = ordered[lo:lo + bs]
            row = self.train_batch(batch, lr, epoch, batch_no)
            report.rows.append(row)
        return report

    def fit(self, records: list[ShotRecord], log=None,
            epoch_hook=None) -> LossReport:
        prepared = self.prepare(records)
        report = LossReport()
        for epoch in range(1, self.schedule.total_epochs + 1):
            started = time.perf_counter()
            self.train_epoch(prepared, epoch, report)
            report.epoch_seconds[epoch] = time.perf_counter() - started
            if log is not None:
                log(f"epoch {epoch:3d} lr {self.schedule.lr_for_epoch(epoch):.5f} "
                    f"d_adv {report.epoch_mean(epoch, 'd_adv')} "
                    f"g_adv {report.epoch_mean(epoch, 'g_adv')} "
                    f"sup {report.epoch_mean(epoch, 'supervised')} "
                    f"({time.perf_counter() - started:.1f}s)")
            if epoch_hook is not None:
                epoch_hook(self, epoch)
        return report

    # -- evaluation-mode loss (no memory writes, no dropout) --------------------------------

    def evaluate_loss(self, prepared: list[PreparedShot]) -> dict:
        """Loss components in eval mode; memory state is left untouched."""
        before = self.registry.memory_state_hash()
        losses = self.compute_losses(sorted(prepared, key=lambda s: s.timestamp),
                                     train=False, advance_memory=False)
        after = self.registry.memory_state_hash()
        assert before == after, "evaluation pass mutated memory state"
        out = {}
        for key in ("d_adv", "g_adv", "supervised", "g_loss"):
            out[key] = float(losses[key].item()) if losses[key] is not None else None
        return out
