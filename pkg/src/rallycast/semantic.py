"""Shared semantic memory: a slot matrix with attention reads and blend writes.

A single matrix of ``slots`` k-dimensional rows is shared by every player.
Reads mirror the episodic read (query from a recurrent head, dot-product
scores, exponential normalization, convex blend).  Writes pass the episodic
readout through a *stateful* write head and then pull every slot toward the
written vector in proportion to its attention weight:

    slot_j' = (1 - w_j) * slot_j + w_j * written

so each slot moves along the segment between its old value and the update, and
a one-hot weight vector replaces exactly one slot.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .nn import tensor as T
from .nn.recurrent import LSTMWeights, lstm_step
from .nn.tensor import Tensor


def blend_slots(matrix, weights, written):
    """Per-slot convex blend: row_j -> (1 - w_j) * row_j + w_j * written."""
    matrix = T.as_tensor(matrix)
    weights = T.as_tensor(weights)
    written = T.as_tensor(written)
    slots = matrix.data.shape[0]
    keep = Tensor(np.ones(slots)) - weights
    col = T.reshape(weights, (slots, 1))
    keep_col = T.reshape(keep, (slots, 1))
    update = T.reshape(written, (1, matrix.data.shape[1]))
    return keep_col * matrix + col * update


class SemanticMemory:
    def __init__(self, dim: int, slots: int, read_head: LSTMWeights,
                 write_head: LSTMWeights, rng: np.random.Generator,
                 init_scale: float = 0.05):
        if slots < 1:
            raise ValueError(f"slots must be >= 1, got {slots}")
        self.dim = dim
        self.slots = slots
        self.read_head = read_head
        self.write_head = write_head
        # zeros would score every slot identically; a small uniform spread
        # lets attention differentiate slots from the first write on
        self.matrix = Tensor(rng.uniform(-init_scale, init_scale, size=(slots, dim)))
        self.write_hidden = Tensor(np.zeros(dim))
        self.write_cell = Tensor(np.zeros(dim))

    def _zero(self) -> Tensor:
        return Tensor(np.zeros(self.dim))

    def read(self, context):
        """Attention read over the slot matrix; returns (m, alpha, query)."""
        c = T.as_tensor(context)
        if c.data.shape != (self.dim,):
            raise T.ShapeError(
                f"context shape {c.data.shape} does not match slot dim ({self.dim},)")
        init_hidden = T.tmean(self.matrix, axis=0)
        query, _ = lstm_step(c, init_hidden, self._zero(), self.read_head)
        scores = self.matrix @ query
        alpha = T.softmax(scores)
        m = alpha @ self.matrix
        return m, alpha.data.copy(), query

    def write(self, em_readout, attention_override: np.ndarray | None = None) -> np.ndarray:
        """Blend ``em_readout`` into the slots; returns the write weights.

        ``attention_override`` substitutes the normalized weights (test hook);
        it is used verbatim, without renormalization.
        """
        m_em = T.as_tensor(em_readout)
        if m_em.data.shape != (self.dim,):
            raise T.ShapeError(
                f"write input shape {m_em.data.shape} does not match slot dim ({self.dim},)")
        written, new_cell = lstm_step(m_em, self.write_hidden, self.write_cell,
                                      self.write_head)
        self.write_hidden, self.write_cell = written, new_cell
        if attention_override is not None:
            alpha = Tensor(np.asarray(attention_override, dtype=float))
        else:
            scores = self.matrix @ written
            alpha = T.softmax(scores)
        self.matrix = blend_slots(self.matrix, alpha, written)
        return alpha.data.copy()

    # -- bookkeeping -----------------------------------------------------------------

    def detach_state(self) -> None:
        self.matrix = self.matrix.detach()
        self.write_hidden = self.write_hidden.detach()
        self.write_cell = self.write_cell.detach()

    def reset(self, rng: np.random.Generator, init_scale: float = 0.05) -> None:
        self.matrix = Tensor(rng.uniform(-init_scale, init_scale,
                                         size=(self.slots, self.dim)))
        self.write_hidden = self._zero()
        self.write_cell = self._zero()

    def state_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.matrix.data.tobytes())
        digest.update(self.write_hidden.data.tobytes())
        digest.update(self.write_cell.data.tobytes())
        return digest.hexdigest()

    def state(self) -> dict:
        return {"matrix": self.matrix.data.copy(),
                "write_hidden": self.write_hidden.data.copy(),
                "write_cell": self.write_cell.data.copy()}

    def load_state(self, state: dict) -> None:
        self.matrix = Tensor(np.array(state["matrix"], copy=True))
        self.write_hidden = Tensor(np.array(state["write_hidden"], copy=True))
        self.write_cell = Tensor(np.array(state["write_cell"], copy=True))
