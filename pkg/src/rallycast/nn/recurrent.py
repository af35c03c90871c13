"""Gated recurrent cells: a standard LSTM step and the two-child tree cell.

The tree cell combines the (hidden, cell) states of a left and right child
into a parent state through an input gate, one forget gate per child, and an
output gate that sees the fresh parent cell state.  There are no bias terms in
the tree cell; the LSTM step carries the usual biases.

All state vectors are row vectors; batched calls stack them as matrix rows.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import tensor as T
from .tensor import Tensor


def _init(rng: np.random.Generator, shape, scale: float = 0.08) -> Tensor:
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


@dataclass
class LSTMWeights:
    """Packed LSTM parameters; gate order along columns is (i, f, g, o)."""

    w: Tensor  # (input_dim + hidden_dim, 4 * hidden_dim)
    b: Tensor  # (4 * hidden_dim,)

    @classmethod
    def create(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> "LSTMWeights":
        return cls(w=_init(rng, (input_dim + hidden_dim, 4 * hidden_dim)),
                   b=Tensor(np.zeros(4 * hidden_dim), requires_grad=True))

    @property
    def hidden_dim(self) -> int:
        return self.b.data.shape[0] // 4

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


def lstm_step(x, hidden, cell, weights: LSTMWeights) -> tuple[Tensor, Tensor]:
    """One LSTM step.  ``x``/``hidden``/``cell`` are 1-D tensors (or arrays)."""
    x, hidden, cell = T.as_tensor(x), T.as_tensor(hidden), T.as_tensor(cell)
    d = weights.hidden_dim
    if hidden.data.shape[-1] != d or cell.data.shape[-1] != d:
        raise T.ShapeError(
            f"lstm_step state dims {hidden.shape}/{cell.shape} do not match hidden_dim {d}")
    if x.data.shape[-1] + d != weights.w.data.shape[0]:
        raise T.ShapeError(
            f"lstm_step input dim {x.shape} does not match weights {weights.w.shape}")
    z = T.concat([x, hidden], axis=-1) @ weights.w + weights.b
    i = T.sigmoid(z[..., 0 * d:1 * d])
    f = T.sigmoid(z[..., 1 * d:2 * d])
    g = T.tanh(z[..., 2 * d:3 * d])
    o = T.sigmoid(z[..., 3 * d:4 * d])
    cell_new = f * cell + i * g
    hidden_new = o * T.tanh(cell_new)
    return hidden_new, cell_new


@dataclass
class TreeCellWeights:
    """The 17 square matrices of the two-child tree cell.

    Naming: ``w_<gate>_<child>`` where the gate is one of ``i`` (input),
    ``fl``/``fr`` (left/right forget), ``u`` (candidate) or ``o`` (output),
    prefixed by ``h`` or ``u`` for the child state it multiplies.  ``w_uo_p``
    multiplies the fresh parent cell state inside the output gate.
    """

    w_hi_l: Tensor
    w_hi_r: Tensor
    w_ui_l: Tensor
    w_ui_r: Tensor
    w_hfl_l: Tensor
    w_hfl_r: Tensor
    w_ufl_l: Tensor
    w_ufl_r: Tensor
    w_hfr_l: Tensor
    w_hfr_r: Tensor
    w_ufr_l: Tensor
    w_ufr_r: Tensor
    w_hu_l: Tensor
    w_hu_r: Tensor
    w_ho_l: Tensor
    w_ho_r: Tensor
    w_uo_p: Tensor

    @classmethod
    def create(cls, dim: int, rng: np.random.Generator) -> "TreeCellWeights":
        return cls(**{f.name: _init(rng, (dim, dim)) for f in fields(cls)})

    @classmethod
    def zeros(cls, dim: int) -> "TreeCellWeights":
        return cls(**{f.name: Tensor(np.zeros((dim, dim)), requires_grad=True)
                      for f in fields(cls)})

    @property
    def dim(self) -> int:
        return self.w_hi_l.data.shape[0]

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.{f.name}": getattr(self, f.name) for f in fields(self)}


def tree_node_update(h_l, h_r, u_l, u_r, weights: TreeCellWeights) -> tuple[Tensor, Tensor]:
    """Combine two children's (hidden, cell) states into the parent state.

    Accepts 1-D vectors or (m, d) row stacks; the update is applied row-wise.
    """
    h_l, h_r = T.as_tensor(h_l), T.as_tensor(h_r)
    u_l, u_r = T.as_tensor(u_l), T.as_tensor(u_r)
    d = weights.dim
    for name, v in (("h_l", h_l), ("h_r", h_r), ("u_l", u_l), ("u_r", u_r)):
        if v.data.shape[-1] != d:
            raise T.ShapeError(f"tree cell {name} has dim {v.data.shape[-1]}, expected {d}")
    i = T.sigmoid(h_l @ weights.w_hi_l + h_r @ weights.w_hi_r
                  + u_l @ weights.w_ui_l + u_r @ weights.w_ui_r)
    f_l = T.sigmoid(h_l @ weights.w_hfl_l + h_r @ weights.w_hfl_r
                    + u_l @ weights.w_ufl_l + u_r @ weights.w_ufl_r)
    f_r = T.sigmoid(h_l @ weights.w_hfr_l + h_r @ weights.w_hfr_r
                    + u_l @ weights.w_ufr_l + u_r @ weights.w_ufr_r)
    beta = h_l @ weights.w_hu_l + h_r @ weights.w_hu_r
    u_p = f_l * u_l + f_r * u_r + i * T.tanh(beta)
    o = T.sigmoid(h_l @ weights.w_ho_l + h_r @ weights.w_ho_r + u_p @ weights.w_uo_p)
    h_p = o * T.tanh(u_p)
    return h_p, u_p
