"""Episodic memory contracts: extraction, attention read, append/tree upkeep."""

import numpy as np
import pytest

from rallycast.episodic import EpisodicMemory
from rallycast.nn import LSTMWeights, Tensor, TreeCellWeights, grad_check
from rallycast.nn import tensor as T
from rallycast.nn.tensor import ShapeError, softmax_normalize

from test_nn_core import lstm_reference, tree_reference


def make_memory(dim=4, capacity=8, depth=3, seed=0):
    rng = np.random.default_rng(seed)
    cell = TreeCellWeights.create(dim, rng)
    head = LSTMWeights.create(dim, dim, rng)
    return EpisodicMemory(dim, capacity, depth, cell, head)


def brute_force_read(mem, context):
    """Independent read: reference LSTM query + explicit weighted sum."""
    matrix_t, mask = mem.extract()
    matrix = matrix_t.data
    init_h = matrix.mean(axis=0)
    q, _ = lstm_reference(np.asarray(context), init_h, np.zeros(mem.dim),
                          mem.read_head.w.data, mem.read_head.b.data)
    scores = matrix @ q
    scores = np.where(mask, scores, -np.inf)
    alpha = softmax_normalize(scores)
    return alpha @ matrix, alpha


class TestExtract:
    def test_depth_one_is_root(self):
        mem = make_memory()
        rng = np.random.default_rng(1)
        for ts in range(4):
            mem.append(rng.normal(size=4), ts)
        matrix, _ = mem.extract(depth=1)
        assert matrix.data.shape[0] == 1
        np.testing.assert_array_equal(matrix.data[0], mem.levels[-1][0].data[0])

    def test_four_leaves_depth_three_gives_seven(self):
        mem = make_memory()
        rng = np.random.default_rng(2)
        for ts in range(4):
            mem.append(rng.normal(size=4), ts)
        matrix, mask = mem.extract(depth=3)
        assert matrix.data.shape[0] == 7
        assert mask.all()

    def test_depth_clamped(self):
        mem = make_memory()
        mem.append(np.ones(4), 0)
        mem.append(np.zeros(4), 1)
        matrix, _ = mem.extract(depth=5)       # only 2 levels exist
        assert matrix.data.shape[0] == 3

    def test_empty_memory_single_zero_column(self):
        mem = make_memory()
        matrix, mask = mem.extract()
        assert matrix.data.shape[0] == 1
        np.testing.assert_array_equal(matrix.data[0], np.zeros(4))
        assert mask.all()

    def test_two_leaf_tree_matches_hand_evaluation(self):
        mem = make_memory(dim=3, seed=5)
        rng = np.random.default_rng(6)
        a, b = rng.normal(size=3), rng.normal(size=3)
        mem.append(a, 0)
        mem.append(b, 1)
        matrix, _ = mem.extract(depth=2)
        root_ref_h, _ = tree_reference(a, b, np.zeros(3), np.zeros(3), mem.cell)
        np.testing.assert_allclose(matrix.data[0], root_ref_h, atol=1e-10)
        np.testing.assert_allclose(matrix.data[1], a, atol=1e-15)
        np.testing.assert_allclose(matrix.data[2], b, atol=1e-15)


class TestRead:
    def test_identical_columns_blend_to_same_vector(self):
        # a single-entry memory extracts exactly one column, so the blend must
        # return that column no matter what the read head computes
        mem = make_memory(dim=3, seed=7)
        v = np.array([0.3, -0.2, 0.5])
        mem.append(v, 0)
        out = mem.read(np.zeros(3))
        np.testing.assert_allclose(out.m.data, v, atol=1e-12)

    def test_single_column_attention_is_one(self):
        mem = make_memory()
        mem.append(np.arange(4.0), 0)
        out = mem.read(np.zeros(4))
        np.testing.assert_allclose(out.attention, [1.0])
        np.testing.assert_allclose(out.m.data, np.arange(4.0), atol=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        for trial in range(5):
            mem = make_memory(dim=4, capacity=2, depth=2, seed=trial)
            mem.append(rng.normal(size=4), 0)
            mem.append(rng.normal(size=4), 1)
            c = rng.normal(size=4)
            out = mem.read(c)
            ref_m, ref_alpha = brute_force_read(mem, c)
            np.testing.assert_allclose(out.m.data, ref_m, atol=1e-10)
            np.testing.assert_allclose(out.attention, ref_alpha, atol=1e-10)

    def test_attention_sums_to_one(self):
        rng = np.random.default_rng(9)
        mem = make_memory(dim=4, capacity=8, depth=3, seed=3)
        for ts in range(5):
            mem.append(rng.normal(size=4), ts)
        out = mem.read(rng.normal(size=4))
        assert abs(out.attention.sum() - 1.0) < 1e-6
        # m lies in the convex hull: check coordinates within column ranges
        cols = mem.extract()[0].data
        attended = cols[out.mask]
        assert np.all(out.m.data <= attended.max(axis=0) + 1e-12)
        assert np.all(out.m.data >= attended.min(axis=0) - 1e-12)

    def test_dim_mismatch(self):
        mem = make_memory()
        mem.append(np.zeros(4), 0)
        with pytest.raises(ShapeError):
            mem.read(np.zeros(3))


class TestAppend:
    def test_append_to_empty(self):
        mem = make_memory()
        c = np.array([1.0, 2.0, 3.0, 4.0])
        mem.append(c, 0)
        assert len(mem) == 1
        root_h = mem.levels[-1][0].data[0]
        np.testing.assert_array_equal(root_h, c)

    def test_sliding_window(self):
        mem = make_memory(capacity=4)
        for ts in range(5):
            mem.append(np.full(4, float(ts)), ts)
        assert len(mem) == 4
        held = [e.embedding.data[0] for e in mem.queue]
        assert held == [1.0, 2.0, 3.0, 4.0]
        assert [e.timestamp for e in mem.queue] == [1, 2, 3, 4]

    def test_incremental_equals_full_rebuild(self):
        rng = np.random.default_rng(10)
        for trial in range(50):
            mem = make_memory(dim=4, capacity=8, depth=3, seed=trial % 7)
            n = int(rng.integers(1, 13))
            for ts in range(n):
                mem.append(rng.normal(size=4), ts)
            incremental = mem.node_values()
            mem._rebuild()
            rebuilt = mem.node_values()
            assert len(incremental) == len(rebuilt)
            for lvl_a, lvl_b in zip(incremental, rebuilt):
                for (h_a, u_a), (h_b, u_b) in zip(lvl_a, lvl_b):
                    np.testing.assert_allclose(h_a, h_b, atol=1e-12)
                    np.testing.assert_allclose(u_a, u_b, atol=1e-12)

    def test_window_replay_reproduces_tree(self):
        rng = np.random.default_rng(11)
        window = [rng.normal(size=4) for _ in range(6)]
        mem_a = make_memory(capacity=4, seed=1)
        for ts, c in enumerate(window):
            mem_a.append(c, ts)
        mem_b = make_memory(capacity=4, seed=1)
        for ts, c in enumerate(window[2:], start=2):   # only the surviving window
            mem_b.append(c, ts)
        assert mem_a.state_hash() == mem_b.state_hash()


class TestReadGradients:
    def test_read_differentiable_in_context_and_cell_weights(self):
        rng = np.random.default_rng(12)
        dim, n_items = 3, 5
        stored = [rng.normal(size=dim) for _ in range(n_items)]
        base_cell = TreeCellWeights.create(dim, rng)
        base_head = LSTMWeights.create(dim, dim, rng)
        cell_names = list(base_cell.params("cell").keys())

        def fn(c, head_w, head_b, *cell_tensors):
            cell = TreeCellWeights(**{n.split(".")[1]: t
                                      for n, t in zip(cell_names, cell_tensors)})
            head = LSTMWeights(w=head_w, b=head_b)
            mem = EpisodicMemory(dim, capacity=8, depth=3, cell=cell, read_head=head)
            for ts, item in enumerate(stored):
                mem.append(item, ts)
            return mem.read(c).m

        inputs = [rng.normal(size=dim), base_head.w.data, base_head.b.data]
        inputs += [p.data for p in base_cell.params("cell").values()]
        err = grad_check(fn, inputs, rng=rng)
        assert err < 1e-4
