"""Reverse-mode differentiable tensor over NumPy arrays.

Only the operations the forecasting stack actually needs are implemented:
elementwise arithmetic with broadcasting, matmul, reductions, shape ops,
activations, softmax, dropout and 2-D (transposed) convolution.  Values are
kept in float64 so the finite-difference checks have headroom.

A ``Tensor`` is a node in a tape: leaf tensors hold data (and optionally
require grad), op tensors remember their parents and a closure that routes the
incoming gradient to them.  ``backward()`` walks the tape in reverse
topological order.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .kernels import conv2d_backward_input, conv2d_backward_weights, conv2d_forward

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes do not match an operation's contract."""


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=DTYPE)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name",
                 "batch_stats")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (),
                 backward: Callable[[np.ndarray], None] | None = None,
                 name: str | None = None):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.name = name

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad}{tag})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        """Constant tensor sharing this tensor's values (cuts the tape)."""
        return Tensor(self.data)

    # -- autograd ------------------------------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        # gradients are only rebound (never mutated in place), so the first
        # contribution can be stored without a defensive copy
        if self.grad is None:
            self.grad = grad
        else:
            self.grad = self.grad + grad

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor (scalar unless ``seed`` given)."""
        if seed is None:
            if self.data.size != 1:
                raise ShapeError(
                    f"backward() without seed requires a scalar, got shape {self.data.shape}")
            seed = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(seed, dtype=DTYPE)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self) -> None:
        self.grad = None

    # -- operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of NumPy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _binary(a, b, out_data, da: Callable, db: Callable) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    req = a.requires_grad or b.requires_grad
    out = Tensor(out_data, requires_grad=req, parents=(a, b) if req else ())

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.asarray(da(g)), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.asarray(db(g)), b.data.shape))

    if req:
        out._backward = backward
    return out


def _unary(a, out_data, da: Callable) -> Tensor:
    a = as_tensor(a)
    req = a.requires_grad
    out = Tensor(out_data, requires_grad=req, parents=(a,) if req else ())
    if req:
        out._backward = lambda g: a._accumulate(_unbroadcast(np.asarray(da(g)), a.data.shape))
    return out


# -- arithmetic ----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data)


def neg(a) -> Tensor:
    return _unary(a, -as_tensor(a).data, lambda g: -g)


def power(a, exponent: float) -> Tensor:
    """Elementwise ``a ** exponent`` for a constant exponent."""
    a = as_tensor(a)
    out = a.data ** exponent
    return _unary(a, out, lambda g: g * exponent * a.data ** (exponent - 1.0))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D/2-D operands, got {ad.shape} @ {bd.shape}")
    try:
        out = ad @ bd
    except ValueError as exc:
        raise ShapeError(f"matmul shape mismatch: {ad.shape} @ {bd.shape}") from exc

    def da(g):
        if ad.ndim == 1 and bd.ndim == 1:   # dot product, g scalar
            return g * bd
        if ad.ndim == 1:                    # (k,) @ (k,m) -> (m,)
            return bd @ g
        if bd.ndim == 1:                    # (n,k) @ (k,) -> (n,)
            return np.outer(g, bd)
        return g @ bd.T                     # (n,k) @ (k,m) -> (n,m)

    def db(g):
        if ad.ndim == 1 and bd.ndim == 1:
            return g * ad
        if ad.ndim == 1:
            return np.outer(ad, g)
        if bd.ndim == 1:
            return ad.T @ g
        return ad.T @ g

    return _binary(a, b, out, da, db)


# -- reductions and shape ops ---------------------------------------------------

def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def da(g):
        g = np.asarray(g)
        if axis is None:
            return np.broadcast_to(g, a.data.shape)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.data.shape)

    return _unary(a, out, da)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.data.shape[ax] for ax in axes]))
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _unary(a, a.data.reshape(shape), lambda g: g.reshape(a.data.shape))


def take(a, index) -> Tensor:
    """Basic (slice / integer) indexing; gradient scattered back into place.

    Only basic indexing is supported (no advanced indices with repeats).
    """
    a = as_tensor(a)
    out = a.data[index]

    def da(g):
        full = np.zeros_like(a.data)
        full[index] += g
        return full

    return _unary(a, out, da)


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat of an empty sequence")
    out = np.concatenate([p.data for p in parts], axis=axis)
    req = any(p.requires_grad for p in parts)
    result = Tensor(out, requires_grad=req, parents=tuple(parts) if req else ())
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            p._accumulate(g[tuple(sl)])

    if req:
        result._backward = backward
    return result


def stack_rows(parts: Sequence) -> Tensor:
    """Stack 1-D tensors of equal length into a matrix (rows)."""
    return concat([reshape(p, (1, -1)) for p in parts], axis=0)


# -- activations -----------------------------------------------------------------

def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _unary(a, a.data * mask, lambda g: g * mask)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ez = np.exp(a.data[~pos])
    out[~pos] = ez / (1.0 + ez)
    return _unary(a, out, lambda g: g * out * (1.0 - out))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _unary(a, out, lambda g: g * (1.0 - out * out))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _unary(a, out, lambda g: g * out)


def log(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, np.log(a.data), lambda g: g / a.data)


def softplus(a) -> Tensor:
    """log(1 + e^x), computed without overflow."""
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)
    sig = np.empty_like(a.data)
    pos = a.data >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ez = np.exp(a.data[~pos])
    sig[~pos] = ez / (1.0 + ez)
    return _unary(a, out, lambda g: g * sig)


def log_sigmoid(a) -> Tensor:
    """log(sigmoid(x)) = -softplus(-x); stable for large |x|."""
    return neg(softplus(neg(a)))


def softmax(a, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; where ``mask`` is False the weight is 0."""
    a = as_tensor(a)
    scores = a.data
    if scores.shape[-1] == 0:
        raise ShapeError("softmax over an empty axis")
    if mask is not None:
        scores = np.where(mask, scores, -np.inf)
        if not mask.any():
            raise ShapeError("softmax with all entries masked")
    shifted = scores - scores.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=-1, keepdims=True)

    def da(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return out * (g - dot)

    return _unary(a, out, da)


def log_softmax(a) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - logz
    sm = np.exp(out)

    def da(g):
        return g - sm * g.sum(axis=-1, keepdims=True)

    return _unary(a, out, da)


def dropout(a, rate: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout; identity when ``train`` is false or rate is 0."""
    a = as_tensor(a)
    if not train or rate <= 0.0:
        return a
    keep = 1.0 - rate
    mask = (rng.random(a.data.shape) < keep) / keep
    return _unary(a, a.data * mask, lambda g: g * mask)


# -- convolution ------------------------------------------------------------------

def conv2d(x, w, stride: tuple[int, int], pads: tuple[tuple[int, int], tuple[int, int]]) -> Tensor:
    """NHWC convolution with explicit per-side padding.

    ``x`` is (N, H, W, Cin); ``w`` is (KH, KW, Cin, Cout).  The padded input
    is built once and reused by both backward passes.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input/weights, got {x.shape} and {w.shape}")
    if x.data.shape[3] != w.data.shape[2]:
        raise ShapeError(
            f"conv2d channel mismatch: input {x.shape} vs weights {w.shape}")
    (pt, pb), (pl, pr) = pads
    xp = np.pad(x.data, ((0, 0), (pt, pb), (pl, pr), (0, 0))) \
        if (pt or pb or pl or pr) else x.data
    out = conv2d_forward(xp, w.data, stride)
    req = x.requires_grad or w.requires_grad
    result = Tensor(out, requires_grad=req, parents=(x, w) if req else ())

    def backward(g):
        if x.requires_grad:
            gxp = conv2d_backward_input(g, w.data, xp.shape, stride)
            h, wd = x.data.shape[1], x.data.shape[2]
            x._accumulate(gxp[:, pt:pt + h, pl:pl + wd, :])
        if w.requires_grad:
            w._accumulate(conv2d_backward_weights(g, xp, w.data.shape, stride))

    if req:
        result._backward = backward
    return result


def conv2d_transpose(x, w, stride: tuple[int, int], out_hw: tuple[int, int],
                     pads: tuple[tuple[int, int], tuple[int, int]]) -> Tensor:
    """Transposed NHWC convolution (the adjoint of :func:`conv2d`).

    ``x`` is (N, h, w, Cin); ``w`` is (KH, KW, Cout, Cin); output spatial size
    is ``out_hw``.  ``stride``/``pads`` describe the *forward* conv that maps
    the output geometry back onto the input geometry.
    """
    x, w = as_tensor(x), as_tensor(w)
    n = x.data.shape[0]
    c_out = w.data.shape[2]
    if x.data.shape[3] != w.data.shape[3]:
        raise ShapeError(
            f"conv2d_transpose channel mismatch: input {x.shape} vs weights {w.shape}")
    (pt, pb), (pl, pr) = pads
    padded_shape = (n, out_hw[0] + pt + pb, out_hw[1] + pl + pr, c_out)
    out_p = conv2d_backward_input(x.data, w.data, padded_shape, stride)
    out = out_p[:, pt:pt + out_hw[0], pl:pl + out_hw[1], :]
    req = x.requires_grad or w.requires_grad
    result = Tensor(out, requires_grad=req, parents=(x, w) if req else ())

    def backward(g):
        gp = np.pad(g, ((0, 0), (pt, pb), (pl, pr), (0, 0))) \
            if (pt or pb or pl or pr) else g
        if x.requires_grad:
            x._accumulate(conv2d_forward(gp, w.data, stride))
        if w.requires_grad:
            w._accumulate(conv2d_backward_weights(x.data, gp, w.data.shape, stride))

    if req:
        result._backward = backward
    return result


def batch_norm_train(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Fused batch normalization over all but the last axis (training mode).

    Returns the normalized tensor; batch mean/variance are exposed on the
    ``batch_stats`` attribute of the result for running-estimate upkeep.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    axes = tuple(range(x.data.ndim - 1))
    count = x.data.size // x.data.shape[-1]
    mu = x.data.mean(axis=axes)
    centered = x.data - mu
    var = (centered * centered).mean(axis=axes)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out_data = xhat * gamma.data + beta.data
    req = x.requires_grad or gamma.requires_grad or beta.requires_grad
    result = Tensor(out_data, requires_grad=req,
                    parents=(x, gamma, beta) if req else ())
    result.batch_stats = (mu, var)  # type: ignore[attr-defined]

    def backward(g):
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=axes))
        g_xhat_sum = (g * xhat).sum(axis=axes)
        if gamma.requires_grad:
            gamma._accumulate(g_xhat_sum)
        if x.requires_grad:
            dxhat = g * gamma.data
            dx = (inv / count) * (count * dxhat
                                  - dxhat.sum(axis=axes)
                                  - xhat * (dxhat * xhat).sum(axis=axes))
            x._accumulate(dx)

    if req:
        result._backward = backward
    return result


def same_padding(in_size: int, kernel: int, stride: int) -> tuple[int, int]:
    """TF-style SAME padding: output size is ceil(in / stride)."""
    out_size = -(-in_size // stride)
    total = max((out_size - 1) * stride + kernel - in_size, 0)
    return total // 2, total - total // 2


# -- plain-array helpers ------------------------------------------------------------

def softmax_normalize(scores) -> np.ndarray:
    """Normalize a score vector into a probability vector (plain arrays).

    Exponential weighting with max-subtraction, so arbitrarily large scores do
    not overflow.  Adding a constant to every score leaves the result unchanged.
    """
    arr = np.asarray(scores, dtype=DTYPE)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"softmax_normalize expects a nonempty vector, got shape {arr.shape}")
    shifted = arr - arr.max()
    ex = np.exp(shifted)
    return ex / ex.sum()


def assert_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {what}")
