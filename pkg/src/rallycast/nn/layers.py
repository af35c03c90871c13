"""Layer blocks used by the perception encoder, generator and discriminator.

Block vocabulary (mirrors the network descriptions elsewhere in the package):

- ``Ck``  : conv (stride 2 by default) + batch-norm + ReLU, k filters
- ``CDk`` : transposed conv + batch-norm + dropout(0.5) + ReLU, k filters;
  with dropout disabled (eval) it behaves exactly like the matching ``Ck``
- ``FCk`` : fully connected layer with k outputs

Batch-norm keeps running statistics (momentum 0.9) for inference.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


class ConfigError(ValueError):
    """Layer/input configuration mismatch."""


def _he_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / max(1, fan_in)), size=shape)


class Dense:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str = "fc"):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.w = Tensor(_he_init(rng, (in_dim, out_dim), in_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)
        self.name = name

    def __call__(self, x) -> Tensor:
        x = T.as_tensor(x)
        if x.data.shape[-1] != self.in_dim:
            raise ConfigError(
                f"{self.name}: input shape {x.data.shape} does not match expected "
                f"feature dim {self.in_dim}")
        return x @ self.w + self.b

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class BatchNorm:
    """Batch normalization over (batch, spatial) axes of NHWC tensors.

    Train mode normalizes with batch statistics and refreshes the running
    estimates; eval mode uses the running estimates only.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x, train: bool) -> Tensor:
        x = T.as_tensor(x)
        if train:
            out = T.batch_norm_train(x, self.gamma, self.beta, eps=self.eps)
            mu, var = out.batch_stats
            self.running_mean = (self.momentum * self.running_mean
                                 + (1 - self.momentum) * mu)
            self.running_var = (self.momentum * self.running_var
                                + (1 - self.momentum) * var)
            return out
        xhat = (x - self.running_mean) * (self.running_var + self.eps) ** -0.5
        return xhat * self.gamma + self.beta

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.gamma": self.gamma, f"{prefix}.beta": self.beta}

    def state(self) -> dict[str, np.ndarray]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        self.running_mean = np.array(state["running_mean"], copy=True)
        self.running_var = np.array(state["running_var"], copy=True)


_COORD_CACHE: dict[tuple[int, int], np.ndarray] = {}


def coordinate_planes(h: int, w: int) -> np.ndarray:
    """Two constant planes holding x/y positions in [-1, 1] (shape (h, w, 2))."""
    key = (h, w)
    if key not in _COORD_CACHE:
        ys = np.linspace(-1.0, 1.0, h)[:, None]
        xs = np.linspace(-1.0, 1.0, w)[None, :]
        _COORD_CACHE[key] = np.stack([np.broadcast_to(xs, (h, w)),
                                      np.broadcast_to(ys, (h, w))], axis=-1).copy()
    return _COORD_CACHE[key]


def _with_coords(x: Tensor) -> Tensor:
    n, h, w, _ = x.data.shape
    planes = coordinate_planes(h, w)
    grid = Tensor(np.broadcast_to(planes, (n, h, w, 2)).copy())
    return T.concat([x, grid], axis=3)


class ConvBlock:
    """``Ck``: convolution + batch-norm + ReLU (optional dropout => ``CDk``).

    With ``coords`` the block sees two extra constant position planes, which
    makes spatially localized structure learnable in few steps.
    """

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator,
                 kernel: int = 3, stride: int = 2, dropout: float = 0.0,
                 coords: bool = False, name: str = "conv"):
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel, self.stride = kernel, stride
        self.dropout = dropout
        self.coords = coords
        eff_in = in_ch + (2 if coords else 0)
        self.w = Tensor(_he_init(rng, (kernel, kernel, eff_in, out_ch),
                                 kernel * kernel * eff_in), requires_grad=True)
        self.bn = BatchNorm(out_ch)
        self.name = name

    def __call__(self, x, train: bool, rng: np.random.Generator | None = None) -> Tensor:
        x = T.as_tensor(x)
        if x.data.ndim != 4 or x.data.shape[3] != self.in_ch:
            raise ConfigError(
                f"{self.name}: input shape {x.data.shape} does not match expected "
                f"(N, H, W, {self.in_ch})")
        if self.coords:
            x = _with_coords(x)
        h, w = x.data.shape[1], x.data.shape[2]
        pads = (T.same_padding(h, self.kernel, self.stride),
                T.same_padding(w, self.kernel, self.stride))
        out = T.conv2d(x, self.w, (self.stride, self.stride), pads)
        out = self.bn(out, train)
        if self.dropout > 0.0:
            if rng is None and train:
                raise ConfigError(f"{self.name}: dropout requires an explicit rng in train mode")
            out = T.dropout(out, self.dropout, rng, train)
        return T.relu(out)

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = {f"{prefix}.w": self.w}
        out.update(self.bn.params(f"{prefix}.bn"))
        return out


class DeconvBlock:
    """``CDk``/``Ck`` decoder block: transposed conv (+BN, dropout, ReLU).

    ``upsample`` doubles the spatial size; otherwise the block is stride 1 and
    keeps it.  The final decoder stage uses ``activation='sigmoid'`` and no BN.
    """

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator,
                 kernel: int = 3, upsample: bool = True, dropout: float = 0.0,
                 batch_norm: bool = True, activation: str = "relu",
                 coords: bool = False, bias_init: float | None = None,
                 name: str = "deconv"):
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel = kernel
        self.upsample = upsample
        self.dropout = dropout
        self.activation = activation
        self.coords = coords
        eff_in = in_ch + (2 if coords else 0)
        # transposed-conv weights: (KH, KW, Cout, Cin)
        self.w = Tensor(_he_init(rng, (kernel, kernel, out_ch, eff_in),
                                 kernel * kernel * eff_in), requires_grad=True)
        self.bn = BatchNorm(out_ch) if batch_norm else None
        self.b = None
        if not batch_norm:
            self.b = Tensor(np.full(out_ch, 0.0 if bias_init is None else bias_init),
                            requires_grad=True)
        self.name = name

    def __call__(self, x, train: bool, rng: np.random.Generator | None = None) -> Tensor:
        x = T.as_tensor(x)
        if x.data.ndim != 4 or x.data.shape[3] != self.in_ch:
            raise ConfigError(
                f"{self.name}: input shape {x.data.shape} does not match expected "
                f"(N, H, W, {self.in_ch})")
        if self.coords:
            x = _with_coords(x)
        h, w = x.data.shape[1], x.data.shape[2]
        if self.upsample:
            out_hw = (h * 2, w * 2)
            stride = (2, 2)
        else:
            out_hw = (h, w)
            stride = (1, 1)
        pads = (T.same_padding(out_hw[0], self.kernel, stride[0]),
                T.same_padding(out_hw[1], self.kernel, stride[1]))
        out = T.conv2d_transpose(x, self.w, stride, out_hw, pads)
        if self.bn is not None:
            out = self.bn(out, train)
        if self.b is not None:
            out = out + self.b
        if self.dropout > 0.0:
            if rng is None and train:
                raise ConfigError(f"{self.name}: dropout requires an explicit rng in train mode")
            out = T.dropout(out, self.dropout, rng, train)
        if self.activation == "relu":
            return T.relu(out)
        if self.activation == "sigmoid":
            return T.sigmoid(out)
        return out

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = {f"{prefix}.w": self.w}
        if self.bn is not None:
            out.update(self.bn.params(f"{prefix}.bn"))
        if self.b is not None:
            out[f"{prefix}.b"] = self.b
        return out


def layer_forward(kind: str, x, params, train: bool = False,
                  rng: np.random.Generator | None = None) -> Tensor:
    """Uniform entry point over the block vocabulary.

    ``kind`` is one of ``Ck``, ``CDk``, ``FCk``, ``sigmoid``, ``tanh``,
    ``relu``; ``params`` carries the matching block instance (ignored for the
    plain activations).
    """
    if kind == "Ck":
        if params.dropout:
            raise ConfigError("Ck block must not carry dropout; use CDk")
        return params(x, train=train, rng=rng)
    if kind == "CDk":
        return params(x, train=train, rng=rng)
    if kind == "FCk":
        return params(x)
    if kind == "sigmoid":
        return T.sigmoid(x)
    if kind == "tanh":
        return T.tanh(x)
    if kind == "relu":
        return T.relu(x)
    raise ConfigError(f"unknown layer kind {kind!r}")
