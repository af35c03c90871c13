"""Registry of differentiable operations wired to the finite-difference checker.

Each entry builds a seeded micro-instance: a pure function over a list of
input arrays (every one treated as differentiable) small enough that central
differences stay fast.  The gradient suite runs every registered op over many
seeds and requires the worst relative error to stay under the tolerance.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .episodic import EpisodicMemory
from .nn import tensor as T
from .nn.gradcheck import grad_check
from .nn.layers import BatchNorm, ConvBlock, DeconvBlock, Dense
from .nn.recurrent import LSTMWeights, TreeCellWeights, lstm_step, tree_node_update
from .nn.tensor import Tensor
from .semantic import SemanticMemory
from .training import (
    adversarial_d_loss,
    adversarial_g_loss,
    classification_loss,
    pixel_bce_loss,
)

OpCase = tuple[Callable, list[np.ndarray]]


def _dense_case(rng) -> OpCase:
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=(4, 5)) * 0.5
    b = rng.normal(size=5) * 0.1

    def fn(xv, wv, bv):
        return T.tanh(xv @ wv + bv)

    return fn, [x, w, b]


def _conv_case(rng) -> OpCase:
    x = rng.normal(size=(1, 6, 6, 2))
    w = rng.normal(size=(3, 3, 2, 3)) * 0.3
    pads = (T.same_padding(6, 3, 2), T.same_padding(6, 3, 2))

    def fn(xv, wv):
        return T.tanh(T.conv2d(xv, wv, (2, 2), pads))

    return fn, [x, w]


def _conv_transpose_case(rng) -> OpCase:
    x = rng.normal(size=(1, 3, 3, 2))
    w = rng.normal(size=(3, 3, 2, 2)) * 0.3
    pads = (T.same_padding(6, 3, 2), T.same_padding(6, 3, 2))

    def fn(xv, wv):
        return T.tanh(T.conv2d_transpose(xv, wv, (2, 2), (6, 6), pads))

    return fn, [x, w]


def _batch_norm_case(rng) -> OpCase:
    x = rng.normal(size=(4, 3, 3, 2)) * 2.0
    gamma = 1.0 + 0.2 * rng.normal(size=2)
    beta = 0.1 * rng.normal(size=2)

    def fn(xv, gv, bv):
        return T.batch_norm_train(xv, gv, bv)

    return fn, [x, gamma, beta]


def _lstm_case(rng) -> OpCase:
    dim = 3
    x = rng.normal(size=dim)
    h = rng.normal(size=dim)
    c = rng.normal(size=dim)
    w = rng.normal(size=(2 * dim, 4 * dim)) * 0.4
    b = rng.normal(size=4 * dim) * 0.1

    def fn(xv, hv, cv, wv, bv):
        h2, c2 = lstm_step(xv, hv, cv, LSTMWeights(w=wv, b=bv))
        return T.concat([h2, c2], axis=0)

    return fn, [x, h, c, w, b]


def _tree_cell_case(rng) -> OpCase:
    dim = 3
    wts = TreeCellWeights.create(dim, rng)
    names = [f.name for f in wts.__dataclass_fields__.values()]
    states = [rng.normal(size=dim) for _ in range(4)]

    def fn(*tensors):
        h_l, h_r, u_l, u_r = tensors[:4]
        cell = TreeCellWeights(**dict(zip(names, tensors[4:])))
        h_p, u_p = tree_node_update(h_l, h_r, u_l, u_r, cell)
        return T.concat([h_p, u_p], axis=0)

    return fn, states + [getattr(wts, n).data for n in names]


def _em_read_case(rng) -> OpCase:
    dim = 3
    stored = [rng.normal(size=dim) for _ in range(5)]
    cell = TreeCellWeights.create(dim, rng)
    head = LSTMWeights.create(dim, dim, rng)
    names = [f.name for f in cell.__dataclass_fields__.values()]

    def fn(c, head_w, head_b, *cell_tensors):
        fresh = TreeCellWeights(**dict(zip(names, cell_tensors)))
        mem = EpisodicMemory(dim, capacity=8, depth=3, cell=fresh,
                             read_head=LSTMWeights(w=head_w, b=head_b))
        for ts, item in enumerate(stored):
            mem.append(item, ts)
        return mem.read(c).m

    inputs = [rng.normal(size=dim), head.w.data, head.b.data]
    inputs += [getattr(cell, n).data for n in names]
    return fn, inputs


def _sm_read_case(rng) -> OpCase:
    dim, slots = 3, 4
    head = LSTMWeights.create(dim, dim, rng)
    matrix = rng.normal(size=(slots, dim))
    c = rng.normal(size=dim)

    def fn(mat, head_w, head_b, ctx):
        init_hidden = T.tmean(mat, axis=0)
        query, _ = lstm_step(ctx, init_hidden, Tensor(np.zeros(dim)),
                             LSTMWeights(w=head_w, b=head_b))
        alpha = T.softmax(mat @ query)
        return alpha @ mat

    return fn, [matrix, head.w.data, head.b.data, c]


def _sm_write_case(rng) -> OpCase:
    dim, slots = 3, 4
    head = LSTMWeights.create(dim, dim, rng)
    matrix = rng.normal(size=(slots, dim))
    m_em = rng.normal(size=dim)

    def fn(mat, head_w, head_b, inp):
        written, _ = lstm_step(inp, Tensor(np.zeros(dim)), Tensor(np.zeros(dim)),
                               LSTMWeights(w=head_w, b=head_b))
        alpha = T.softmax(mat @ written)
        from .semantic import blend_slots

        updated = blend_slots(mat, alpha, written)
        return T.tsum(updated * updated)

    return fn, [matrix, head.w.data, head.b.data, m_em]


def _adversarial_loss_case(rng) -> OpCase:
    real = rng.normal(size=4)
    fake = rng.normal(size=4)

    def fn(r, f):
        return adversarial_d_loss(r, f) + adversarial_g_loss(f)

    return fn, [real, fake]


def _classification_loss_case(rng) -> OpCase:
    logits = rng.normal(size=(4, 3))
    labels = rng.integers(0, 3, size=4)

    def fn(lv):
        return classification_loss(lv, labels)

    return fn, [logits]


def _pixel_loss_case(rng) -> OpCase:
    logits = rng.normal(size=(2, 4, 4, 1))
    real = rng.random((2, 4, 4, 1))

    def fn(f):
        return pixel_bce_loss(f, real)

    return fn, [logits]


def _softmax_case(rng) -> OpCase:
    scores = rng.normal(size=6) * 2.0

    def fn(s):
        return T.softmax(s)

    return fn, [scores]


REGISTERED_OPS: dict[str, Callable[[np.random.Generator], OpCase]] = {
    "dense": _dense_case,
    "conv": _conv_case,
    "conv_transpose": _conv_transpose_case,
    "batch_norm": _batch_norm_case,
    "softmax_attention": _softmax_case,
    "lstm_cell": _lstm_case,
    "tree_cell": _tree_cell_case,
    "episodic_read": _em_read_case,
    "slot_read": _sm_read_case,
    "slot_write": _sm_write_case,
    "adversarial_losses": _adversarial_loss_case,
    "classification_loss": _classification_loss_case,
    "pixel_loss": _pixel_loss_case,
}


def check_op(name: str, seed: int, h: float = 1e-5) -> float:
    """Worst relative gradient error for one seeded instance of ``name``."""
    builder = REGISTERED_OPS[name]
    rng = np.random.default_rng(seed)
    fn, inputs = builder(rng)
    return grad_check(fn, inputs, h=h, rng=np.random.default_rng(seed + 1))


def run_gradient_suite(instances_per_op: int = 10, tolerance: float = 1e-4,
                       log=None) -> dict[str, float]:
    """Check every registered op; returns the worst error per op."""
    worst: dict[str, float] = {}
    for name in REGISTERED_OPS:
        errs = [check_op(name, seed) for seed in range(instances_per_op)]
        worst[name] = max(errs)
        if log:
            status = "ok" if worst[name] < tolerance else "FAIL"
            log(f"[grad] {name:20s} worst rel err {worst[name]:.3e} {status}")
    return worst
