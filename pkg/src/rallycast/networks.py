"""The three trainable networks: perception encoder, response generator,
and the dual-head discriminator.

Width schedule: the encoder runs 8 stride-2 conv blocks at widths
64-128-256-512-512-512-512-512 divided by ``width_divisor`` (8 at desk scale),
then a dense layer joins the flattened code with the sparse feature blocks to
produce the context embedding.  The generator projects the conditioning
vector onto a 4x4 spatial seed and decodes through 7 blocks at widths
512-512-512-512-256-128-64 (divided likewise), the first three with 50%
dropout; enough of the trailing blocks upsample to reach the output size.
The discriminator mirrors the encoder on the image/response channel stack and
splits into a real/fake head and a 3-way shot-type head.

Convolutions are 3x3; the first encoder stage and every decoder stage also
see two constant coordinate planes, which makes precisely localized output
structure learnable within a short schedule.  With unscaled widths, 512x512
io and a 512-wide embedding this puts the generation pipeline (encoder +
memory cells/heads + generator) at 33.5M trainable parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import sparse_width
from .nn import tensor as T
from .nn.layers import ConvBlock, DeconvBlock, Dense
from .nn.tensor import Tensor

PN_WIDTHS = (64, 128, 256, 512, 512, 512, 512, 512)
RGN_WIDTHS = (512, 512, 512, 512, 256, 128, 64)
RGN_DROPOUT_BLOCKS = 3
SEED_SPATIAL = 4
SEED_CHANNELS = 64
SHOT_CLASSES = 3


@dataclass
class NetworkConfig:
    image_size: int = 64
    width_divisor: int = 8
    embed_dim: int = 64          # context embedding width (k)
    noise_dim: int = 16
    kernel: int = 3
    max_players: int = 8
    use_em: bool = True
    use_sm: bool = True

    def __post_init__(self):
        if self.image_size < SEED_SPATIAL or self.image_size & (self.image_size - 1):
            raise ValueError(f"image_size must be a power of two >= {SEED_SPATIAL}")
        for name, width in (("PN", PN_WIDTHS[0]), ("seed", SEED_CHANNELS)):
            if width % self.width_divisor:
                raise ValueError(f"width_divisor {self.width_divisor} does not divide "
                                 f"the {name} widths")

    @property
    def sparse_dim(self) -> int:
        return sparse_width(self.max_players)

    @property
    def cond_dim(self) -> int:
        # the decoder is conditioned on the full observed state: embedding,
        # memory readouts, the sparse context blocks, and the noise draw
        parts = 1 + int(self.use_em) + int(self.use_sm)
        return parts * self.embed_dim + self.sparse_dim + self.noise_dim

    def pn_widths(self) -> list[int]:
        return [w // self.width_divisor for w in PN_WIDTHS]

    def rgn_widths(self) -> list[int]:
        return [w // self.width_divisor for w in RGN_WIDTHS]


def _spatial_after_encoder(size: int, stages: int) -> int:
    for _ in range(stages):
        size = max(1, -(-size // 2))
    return size


class PerceptionNetwork:
    """Conv encoder + dense join producing the context embedding."""

    def __init__(self, config: NetworkConfig, rng: np.random.Generator):
        self.config = config
        widths = config.pn_widths()
        self.blocks: list[ConvBlock] = []
        in_ch = 3
        for i, out_ch in enumerate(widths):
            self.blocks.append(ConvBlock(in_ch, out_ch, rng, kernel=config.kernel,
                                         stride=2, coords=(i == 0),
                                         name=f"pn.conv{i}"))
            in_ch = out_ch
        side = _spatial_after_encoder(config.image_size, len(widths))
        self.flat_dim = side * side * widths[-1]
        self.fc = Dense(self.flat_dim + config.sparse_dim, config.embed_dim, rng,
                        name="pn.fc")

    def forward(self, images, sparse, train: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        x = T.as_tensor(images)
        s = T.as_tensor(sparse)
        if x.data.ndim != 4 or x.data.shape[1] != self.config.image_size:
            raise T.ShapeError(
                f"perception input shape {x.data.shape} does not match configured "
                f"(N, {self.config.image_size}, {self.config.image_size}, 3)")
        if s.data.shape[-1] != self.config.sparse_dim:
            raise T.ShapeError(
                f"sparse input dim {s.data.shape} does not match configured "
                f"{self.config.sparse_dim}")
        for block in self.blocks:
            x = block(x, train=train, rng=rng)
        flat = T.reshape(x, (x.data.shape[0], self.flat_dim))
        return self.fc(T.concat([flat, s], axis=1))

    def params(self, prefix: str = "pn") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, block in enumerate(self.blocks):
            out.update(block.params(f"{prefix}.conv{i}"))
        out.update(self.fc.params(f"{prefix}.fc"))
        return out

    def bn_states(self) -> list[dict]:
        return [b.bn.state() for b in self.blocks]

    def load_bn_states(self, states: list[dict]) -> None:
        for block, state in zip(self.blocks, states):
            block.bn.load_state(state)


class ResponseGenerator:
    """Noise-conditioned decoder from the conditioning vector to a map."""

    def __init__(self, config: NetworkConfig, rng: np.random.Generator):
        self.config = config
        widths = config.rgn_widths()
        self.seed_channels = SEED_CHANNELS // config.width_divisor
        self.proj = Dense(config.cond_dim,
                          SEED_SPATIAL * SEED_SPATIAL * self.seed_channels, rng,
                          name="rgn.proj")
        doublings = int(np.log2(config.image_size // SEED_SPATIAL))
        if doublings > len(widths):
            raise ValueError(f"image_size {config.image_size} needs {doublings} "
                             f"upsampling stages but only {len(widths)} exist")
        self.blocks: list[DeconvBlock] = []
        in_ch = self.seed_channels
        for i, out_ch in enumerate(widths):
            upsample = i >= len(widths) - doublings
            dropout = 0.5 if i < RGN_DROPOUT_BLOCKS else 0.0
            self.blocks.append(DeconvBlock(in_ch, out_ch, rng, kernel=config.kernel,
                                           upsample=upsample, dropout=dropout,
                                           coords=True, name=f"rgn.deconv{i}"))
            in_ch = out_ch
        # dark-start bias: targets are mostly empty, so open at ~sigma(-2)
        self.head = DeconvBlock(in_ch, 1, rng, kernel=config.kernel, upsample=False,
                                dropout=0.0, batch_norm=False, activation="none",
                                coords=True, bias_init=-2.0, name="rgn.head")

    def forward(self, cond, train: bool = False,
                rng: np.random.Generator | None = None, with_logits: bool = False):
        """Map in [0, 1]; ``with_logits`` also returns the pre-sigmoid logits
        (reconstruction losses live in logit space so the output never
        saturates against mostly-empty targets)."""
        c = T.as_tensor(cond)
        if c.data.shape[-1] != self.config.cond_dim:
            raise T.ShapeError(
                f"conditioning dim {c.data.shape} does not match configured "
                f"{self.config.cond_dim}")
        n = c.data.shape[0]
        x = self.proj(c)
        x = T.relu(x)
        x = T.reshape(x, (n, SEED_SPATIAL, SEED_SPATIAL, self.seed_channels))
        for block in self.blocks:
            x = block(x, train=train, rng=rng)
        logits = self.head(x, train=train, rng=rng)
        probs = T.sigmoid(logits)
        if with_logits:
            return probs, logits
        return probs

    def params(self, prefix: str = "rgn") -> dict[str, Tensor]:
        out = self.proj.params(f"{prefix}.proj")
        for i, block in enumerate(self.blocks):
            out.update(block.params(f"{prefix}.deconv{i}"))
        out.update(self.head.params(f"{prefix}.head"))
        return out

    def bn_states(self) -> list[dict]:
        return [b.bn.state() for b in self.blocks if b.bn is not None]

    def load_bn_states(self, states: list[dict]) -> None:
        blocks = [b for b in self.blocks if b.bn is not None]
        for block, state in zip(blocks, states):
            block.bn.load_state(state)


class Discriminator:
    """Shared conv trunk with a real/fake head and a shot-type head.

    Consumes the perception image stacked with a response map (4 channels)
    plus the sparse feature blocks.  Heads emit logits; use
    :func:`discriminator_probs` for calibrated outputs.
    """

    def __init__(self, config: NetworkConfig, rng: np.random.Generator):
        self.config = config
        widths = config.pn_widths()
        self.blocks: list[ConvBlock] = []
        in_ch = 4
        for i, out_ch in enumerate(widths):
            self.blocks.append(ConvBlock(in_ch, out_ch, rng, kernel=config.kernel,
                                         stride=2, coords=(i == 0),
                                         name=f"disc.conv{i}"))
            in_ch = out_ch
        side = _spatial_after_encoder(config.image_size, len(widths))
        self.flat_dim = side * side * widths[-1]
        # separate dense stages per head: the adversarial path is typically
        # trained throttled (it saturates otherwise) while the shot-type path
        # keeps the full rate; both read the shared conv trunk + sparse blocks
        self.fc = Dense(self.flat_dim + config.sparse_dim, config.embed_dim, rng,
                        name="disc.fc")
        self.fc_cls = Dense(self.flat_dim + config.sparse_dim, config.embed_dim, rng,
                            name="disc.fc_cls")
        self.head_real = Dense(config.embed_dim, 1, rng, name="disc.real")
        self.head_cls = Dense(config.embed_dim, SHOT_CLASSES, rng, name="disc.cls")

    def forward(self, images, response, sparse, train: bool = False,
                rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor]:
        """Returns (real/fake logits (n,), class logits (n, 3))."""
        img = T.as_tensor(images)
        resp = T.as_tensor(response)
        if resp.data.ndim == 3:
            resp = T.reshape(resp, resp.data.shape + (1,))
        if img.data.shape[:3] != resp.data.shape[:3]:
            raise T.ShapeError(
                f"image {img.data.shape} and response {resp.data.shape} disagree")
        x = T.concat([img, resp], axis=3)
        for block in self.blocks:
            x = block(x, train=train, rng=rng)
        flat = T.reshape(x, (x.data.shape[0], self.flat_dim))
        joined = T.concat([flat, T.as_tensor(sparse)], axis=1)
        feat = T.relu(self.fc(joined))
        real_logits = T.reshape(self.head_real(feat), (feat.data.shape[0],))
        cls_logits = self.head_cls(T.relu(self.fc_cls(joined)))
        return real_logits, cls_logits

    def adversarial_params(self, prefix: str = "disc") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, block in enumerate(self.blocks):
            out.update(block.params(f"{prefix}.conv{i}"))
        out.update(self.fc.params(f"{prefix}.fc"))
        out.update(self.head_real.params(f"{prefix}.real"))
        return out

    def classifier_params(self, prefix: str = "disc") -> dict[str, Tensor]:
        out = self.fc_cls.params(f"{prefix}.fc_cls")
        out.update(self.head_cls.params(f"{prefix}.cls"))
        return out

    def params(self, prefix: str = "disc") -> dict[str, Tensor]:
        out = self.adversarial_params(prefix)
        out.update(self.classifier_params(prefix))
        return out

    def bn_states(self) -> list[dict]:
        return [b.bn.state() for b in self.blocks]

    def load_bn_states(self, states: list[dict]) -> None:
        for block, state in zip(self.blocks, states):
            block.bn.load_state(state)


def discriminator_probs(real_logits: Tensor, cls_logits: Tensor) -> tuple[np.ndarray, np.ndarray]:
    p_real = 1.0 / (1.0 + np.exp(-real_logits.data))
    shifted = cls_logits.data - cls_logits.data.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    probs = ex / ex.sum(axis=-1, keepdims=True)
    return p_real, probs


def count_parameters(params: dict[str, Tensor]) -> int:
    return int(sum(p.data.size for p in params.values()))


def draw_noise(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return rng.standard_normal((n, dim))
