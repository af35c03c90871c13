"""Run configuration: one declarative config drives training, eval and serving.

``variant`` selects an ablation arm; :func:`apply_variant` resolves it into
the structural switches (per-player models, episodic/semantic memory,
discriminator, loss form).  Configs load from TOML with CLI overrides.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

VARIANTS = ("G-only", "GD", "GD*", "GDEM-global", "GDEM-local", "MSSGAN-global", "full")


@dataclass
class RunConfig:
    # architecture
    image_size: int = 64
    width_divisor: int = 8
    embed_dim: int = 64          # k
    noise_dim: int = 16          # z width
    kernel: int = 3
    max_players: int = 8
    em_capacity: int = 64        # N
    em_depth: int = 3            # l
    sm_slots: int = 16           # b
    # optimization.  Desk-scale default; the source schedule pairs batch 32
    # with 30 full epochs, while the compressed 5+10 schedule needs the extra
    # optimizer steps that batch 16 provides.
    batch_size: int = 16
    epochs_phase1: int = 5
    lr1: float = 0.002
    epochs_phase2: int = 10
    lr2: float = 0.0002
    lambda_eta: float = 1.0      # supervised-term weight
    # the adversarial discriminator path (conv trunk, dense, real/fake head)
    # trains at lr * d_lr_scale: unthrottled it saturates within an epoch
    # (real/fake becomes trivially separable) and its sharpening pressure on
    # the generator vanishes; the shot-type path keeps the full rate
    d_lr_scale: float = 0.1
    # pixel-reconstruction weight on the generator objective.  The adversarial
    # term alone cannot pull the generator onto the sparse map manifold at
    # desk scale (the discriminator saturates within two epochs), so the
    # adversarial arms pair it with a reconstruction term, as in the
    # conditional image-to-image objective this family builds on.  The
    # reconstruction is per-pixel cross entropy on the map logits; the
    # supervised-only arm trains on it alone.
    recon_weight: float = 100.0
    label_fraction: float = 1.0  # share of training shots that keep their label
    grad_through_reads: bool = True
    # run identity
    variant: str = "full"
    seed: int = 0

    # structural switches (resolved from the variant)
    per_player: bool = True
    use_em: bool = True
    use_sm: bool = True
    use_disc: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; valid: {', '.join(VARIANTS)}")
        if self.lambda_eta < 0:
            raise ValueError("lambda_eta must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def network_config(self):
        from .networks import NetworkConfig

        return NetworkConfig(image_size=self.image_size,
                             width_divisor=self.width_divisor,
                             embed_dim=self.embed_dim,
                             noise_dim=self.noise_dim,
                             kernel=self.kernel,
                             max_players=self.max_players,
                             use_em=self.use_em,
                             use_sm=self.use_sm)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def apply_variant(config: RunConfig, variant: str | None = None) -> RunConfig:
    """Resolve a variant id into the structural switches it implies."""
    variant = variant or config.variant
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; valid: {', '.join(VARIANTS)}")
    deltas = {
        "G-only": dict(per_player=False, use_em=False, use_sm=False, use_disc=False,
                       lambda_eta=0.0, recon_weight=1.0),   # pure pixel regression
        "GD": dict(per_player=False, use_em=False, use_sm=False, use_disc=True,
                   lambda_eta=0.0),
        "GD*": dict(per_player=False, use_em=False, use_sm=False, use_disc=True),
        "GDEM-global": dict(per_player=False, use_em=True, use_sm=False, use_disc=True),
        "GDEM-local": dict(per_player=True, use_em=True, use_sm=False, use_disc=True),
        "MSSGAN-global": dict(per_player=False, use_em=True, use_sm=True, use_disc=True),
        "full": dict(per_player=True, use_em=True, use_sm=True, use_disc=True),
    }[variant]
    if variant == "GD*" and config.lambda_eta <= 0:
        deltas["lambda_eta"] = 1.0
    return replace(config, variant=variant, **deltas)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a TOML config file, apply overrides, resolve the variant."""
    raw: dict = {}
    if path is not None:
        with open(Path(path), "rb") as fh:
            raw = tomllib.load(fh)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig.from_dict(raw)
    return apply_variant(config)
