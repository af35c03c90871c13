"""Per-player episodic memory: a chronological queue summarized by a cell tree.

The queue holds up to ``capacity`` context embeddings in arrival order.  A
complete binary tree sits on top: leaves align with queue slots (zero-padded
up to the next power of two), each leaf exposes its embedding as the hidden
state (with an empty cell state), and every internal node combines its two
children through the gated tree cell.  Reading attends over the hidden vectors
of the top ``depth`` tree levels; appending re-derives exactly the ancestors
whose leaf contents changed (an eviction shifts every leaf, so it rebuilds).

Each level is stored as a stacked (nodes, dim) matrix pair (H, U), so a level
is combined in one batched cell evaluation.  Within a training window the
stacks are live tape tensors and gradients flow from a read back into the
tree-cell weights; ``detach_state`` freezes them at window boundaries.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .nn import tensor as T
from .nn.recurrent import LSTMWeights, TreeCellWeights, lstm_step, tree_node_update
from .nn.tensor import Tensor


@dataclass
class MemoryEntry:
    """One stored embedding plus provenance for activation traces."""

    embedding: Tensor            # (k,)
    timestamp: int
    meta: dict = field(default_factory=dict)


@dataclass
class MemoryReadout:
    m: Tensor                    # (k,) blended readout
    attention: np.ndarray        # weights over extracted columns (sums to 1)
    query: Tensor                # (k,)
    mask: np.ndarray             # True where the column was attendable


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


class EpisodicMemory:
    """Bounded chronological queue plus its bottom-up summary tree."""

    def __init__(self, dim: int, capacity: int, depth: int,
                 cell: TreeCellWeights, read_head: LSTMWeights):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if depth < 1:
            raise ValueError(f"extraction depth must be >= 1, got {depth}")
        self.dim = dim
        self.capacity = capacity
        self.depth = depth
        self.cell = cell
        self.read_head = read_head
        self.queue: list[MemoryEntry] = []
        # levels[0] = leaves ... levels[-1] = root; each level is (H, U) stacks
        self.levels: list[tuple[Tensor, Tensor]] = []

    # -- structure ----------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.queue)

    @property
    def leaf_count(self) -> int:
        return _next_pow2(max(1, len(self.queue)))

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def _zero(self) -> Tensor:
        return Tensor(np.zeros(self.dim))

    def _leaf_stack(self) -> tuple[Tensor, Tensor]:
        leaf_count = self.leaf_count
        rows = [T.reshape(e.embedding, (1, self.dim)) for e in self.queue]
        pad = leaf_count - len(rows)
        if pad:
            rows.append(Tensor(np.zeros((pad, self.dim))))
        h = T.concat(rows, axis=0) if len(rows) > 1 else rows[0]
        return h, Tensor(np.zeros((leaf_count, self.dim)))

    def _rebuild(self) -> None:
        h, u = self._leaf_stack()
        self.levels = [(h, u)]
        while h.data.shape[0] > 1:
            h_l, h_r = h[0::2], h[1::2]
            u_l, u_r = u[0::2], u[1::2]
            h, u = tree_node_update(h_l, h_r, u_l, u_r, self.cell)
            self.levels.append((h, u))

    @staticmethod
    def _splice(stack: Tensor, row: int, value: Tensor) -> Tensor:
        parts = []
        if row > 0:
            parts.append(stack[:row])
        parts.append(value)
        if row + 1 < stack.data.shape[0]:
            parts.append(stack[row + 1:])
        return T.concat(parts, axis=0) if len(parts) > 1 else parts[0]

    def _update_path(self, slot: int) -> None:
        """Recompute the ancestors of one changed leaf, bottom-up."""
        h0, u0 = self.levels[0]
        new_leaf = T.reshape(self.queue[slot].embedding, (1, self.dim))
        self.levels[0] = (self._splice(h0, slot, new_leaf),
                          self._splice(u0, slot, Tensor(np.zeros((1, self.dim)))))
        idx = slot
        for lvl in range(1, len(self.levels)):
            idx //= 2
            h_below, u_below = self.levels[lvl - 1]
            h_l, h_r = h_below[2 * idx:2 * idx + 1], h_below[2 * idx + 1:2 * idx + 2]
            u_l, u_r = u_below[2 * idx:2 * idx + 1], u_below[2 * idx + 1:2 * idx + 2]
            h_p, u_p = tree_node_update(h_l, h_r, u_l, u_r, self.cell)
            h_cur, u_cur = self.levels[lvl]
            self.levels[lvl] = (self._splice(h_cur, idx, h_p),
                                self._splice(u_cur, idx, u_p))

    # -- write --------------------------------------------------------------------

    def append(self, embedding, timestamp: int, meta: dict | None = None) -> None:
        """Enqueue an embedding (evicting the oldest once at capacity)."""
        emb = T.as_tensor(embedding)
        if emb.data.shape != (self.dim,):
            raise T.ShapeError(
                f"embedding shape {emb.data.shape} does not match memory dim ({self.dim},)")
        entry = MemoryEntry(embedding=emb, timestamp=timestamp, meta=dict(meta or {}))
        if len(self.queue) >= self.capacity:
            # sliding window: every leaf shifts, so every ancestor changes
            self.queue.pop(0)
            self.queue.append(entry)
            self._rebuild()
            return
        self.queue.append(entry)
        if not self.levels or self.levels[0][0].data.shape[0] < self.leaf_count:
            self._rebuild()          # the tree re-levels: rebuild everything
        else:
            self._update_path(len(self.queue) - 1)

    # -- read ---------------------------------------------------------------------

    def extract(self, depth: int | None = None) -> tuple[Tensor, np.ndarray]:
        """Hidden vectors of the top ``depth`` levels, breadth-first rows.

        Returns (matrix, mask); masked-out rows summarize only padding.  An
        empty memory yields a single zero row (attendable).
        """
        depth = self.depth if depth is None else depth
        if not self.queue:
            return Tensor(np.zeros((1, self.dim))), np.array([True])
        depth = min(depth, self.n_levels)
        stacks = []
        mask: list[bool] = []
        n_real = len(self.queue)
        for d in range(depth):
            h, _u = self.levels[self.n_levels - 1 - d]
            stacks.append(h)
            count = h.data.shape[0]
            span = self.leaf_count // count
            mask.extend(idx * span < n_real for idx in range(count))
        matrix = T.concat(stacks, axis=0) if len(stacks) > 1 else stacks[0]
        return matrix, np.array(mask)

    def read(self, context) -> MemoryReadout:
        """Attention read: query from the read head, blend over extracted nodes."""
        c = T.as_tensor(context)
        if c.data.shape != (self.dim,):
            raise T.ShapeError(
                f"context shape {c.data.shape} does not match memory dim ({self.dim},)")
        matrix, mask = self.extract()
        init_hidden = T.tmean(matrix, axis=0)
        query, _ = lstm_step(c, init_hidden, self._zero(), self.read_head)
        scores = matrix @ query
        alpha = T.softmax(scores, mask=mask)
        m = alpha @ matrix
        return MemoryReadout(m=m, attention=alpha.data.copy(), query=query, mask=mask)

    def leaf_scores(self, context) -> tuple[np.ndarray, list[MemoryEntry]]:
        """Normalized query similarity against every stored embedding (leaf level)."""
        if not self.queue:
            raise ValueError("episodic memory is empty")
        c = T.as_tensor(context)
        matrix = T.stack_rows([e.embedding for e in self.queue])
        init_hidden = T.tmean(matrix, axis=0)
        query, _ = lstm_step(c, init_hidden, self._zero(), self.read_head)
        scores = (matrix @ query).data
        weights = T.softmax_normalize(scores)
        return weights, list(self.queue)

    # -- bookkeeping -----------------------------------------------------------------

    def clear(self) -> None:
        self.queue = []
        self.levels = []

    def detach_state(self) -> None:
        """Freeze all stored tensors to constants (cuts the training tape)."""
        for entry in self.queue:
            entry.embedding = entry.embedding.detach()
        self.levels = [(h.detach(), u.detach()) for (h, u) in self.levels]

    def node_values(self) -> list[list[tuple[np.ndarray, np.ndarray]]]:
        out = []
        for h, u in self.levels:
            out.append([(h.data[i].copy(), u.data[i].copy())
                        for i in range(h.data.shape[0])])
        return out

    def state_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(str(len(self.queue)).encode())
        for entry in self.queue:
            digest.update(np.int64(entry.timestamp).tobytes())
            digest.update(entry.embedding.data.tobytes())
        for h, u in self.levels:
            digest.update(np.ascontiguousarray(h.data).tobytes())
            digest.update(np.ascontiguousarray(u.data).tobytes())
        return digest.hexdigest()

    # -- serialization -----------------------------------------------------------------

    def state(self) -> dict:
        # node values are serialized verbatim: a rebuild at load time could
        # differ because nodes may predate the latest weight updates
        out = {
            "embeddings": np.stack([e.embedding.data for e in self.queue])
            if self.queue else np.zeros((0, self.dim)),
            "timestamps": np.array([e.timestamp for e in self.queue], dtype=np.int64),
            "metas": [e.meta for e in self.queue],
        }
        for i, (h, u) in enumerate(self.levels):
            out[f"level{i}_h"] = h.data.copy()
            out[f"level{i}_u"] = u.data.copy()
        out["n_tree_levels"] = np.array([len(self.levels)], dtype=np.int64)
        return out

    def load_state(self, state: dict) -> None:
        self.clear()
        embeddings = state["embeddings"]
        timestamps = state["timestamps"]
        metas = state.get("metas") or [{} for _ in timestamps]
        for emb, ts, meta in zip(embeddings, timestamps, metas):
            self.queue.append(MemoryEntry(Tensor(np.array(emb, copy=True)),
                                          int(ts), dict(meta)))
        n_levels = int(state["n_tree_levels"][0]) if "n_tree_levels" in state else 0
        if n_levels:
            for i in range(n_levels):
                self.levels.append((Tensor(np.array(state[f"level{i}_h"], copy=True)),
                                    Tensor(np.array(state[f"level{i}_u"], copy=True))))
        elif self.queue:
            self._rebuild()
