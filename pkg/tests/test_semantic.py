"""Semantic memory contracts: slot reads, blend writes, purity, gradients."""

import numpy as np
import pytest

from rallycast.nn import LSTMWeights, Tensor, grad_check
from rallycast.nn import tensor as T
from rallycast.nn.tensor import ShapeError, softmax_normalize
from rallycast.semantic import SemanticMemory, blend_slots

from test_nn_core import lstm_reference


def make_sm(dim=3, slots=3, seed=0):
    rng = np.random.default_rng(seed)
    read = LSTMWeights.create(dim, dim, rng)
    write = LSTMWeights.create(dim, dim, rng)
    return SemanticMemory(dim, slots, read, write, rng)


class TestRead:
    def test_all_slots_equal(self):
        sm = make_sm()
        v = np.array([0.4, -0.1, 0.2])
        sm.matrix = Tensor(np.tile(v, (3, 1)))
        m, alpha, _ = sm.read(np.zeros(3))
        np.testing.assert_allclose(m.data, v, atol=1e-12)

    def test_single_slot(self):
        sm = make_sm(slots=1)
        m, alpha, _ = sm.read(np.ones(3))
        np.testing.assert_allclose(alpha, [1.0])
        np.testing.assert_allclose(m.data, sm.matrix.data[0], atol=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for trial in range(5):
            sm = make_sm(seed=trial)
            sm.matrix = Tensor(rng.normal(size=(3, 3)))
            c = rng.normal(size=3)
            m, alpha, _ = sm.read(c)
            init_h = sm.matrix.data.mean(axis=0)
            q, _ = lstm_reference(c, init_h, np.zeros(3),
                                  sm.read_head.w.data, sm.read_head.b.data)
            ref_alpha = softmax_normalize(sm.matrix.data @ q)
            ref_m = ref_alpha @ sm.matrix.data
            np.testing.assert_allclose(alpha, ref_alpha, atol=1e-10)
            np.testing.assert_allclose(m.data, ref_m, atol=1e-10)

    def test_dim_mismatch(self):
        sm = make_sm()
        with pytest.raises(ShapeError):
            sm.read(np.zeros(5))


class TestWrite:
    def test_one_hot_replaces_exactly_one_slot(self):
        matrix = Tensor(np.array([[1.0, 3.0], [2.0, 4.0]]))
        written = Tensor(np.array([9.0, 9.0]))
        out = blend_slots(matrix, np.array([1.0, 0.0]), written)
        np.testing.assert_array_equal(out.data, [[9.0, 9.0], [2.0, 4.0]])

    def test_zero_weights_leave_matrix_unchanged(self):
        sm = make_sm(dim=2, slots=2, seed=2)
        before = sm.matrix.data.copy()
        sm.write(np.array([0.5, -0.5]), attention_override=np.zeros(2))
        np.testing.assert_array_equal(sm.matrix.data, before)

    def test_blend_matches_hand_evaluation(self):
        rng = np.random.default_rng(3)
        matrix = rng.normal(size=(2, 2))
        weights = softmax_normalize(rng.normal(size=2))
        written = rng.normal(size=2)
        out = blend_slots(Tensor(matrix), Tensor(weights), Tensor(written))
        ref = np.stack([(1 - weights[j]) * matrix[j] + weights[j] * written
                        for j in range(2)])
        np.testing.assert_allclose(out.data, ref, atol=1e-12)

    def test_write_weights_sum_to_one_and_slots_stay_convex(self):
        rng = np.random.default_rng(4)
        sm = make_sm(dim=4, slots=5, seed=4)
        for _ in range(10):
            before = sm.matrix.data.copy()
            m_em = rng.normal(size=4)
            alpha = sm.write(m_em)
            assert abs(alpha.sum() - 1.0) < 1e-6
            written = sm.write_hidden.data
            after = sm.matrix.data
            for j in range(5):
                # each slot lies on the segment [before_j, written]
                seg = written - before[j]
                moved = after[j] - before[j]
                if np.linalg.norm(seg) > 1e-12:
                    t = moved @ seg / (seg @ seg)
                    assert -1e-9 <= t <= 1.0 + 1e-9
                    np.testing.assert_allclose(moved, t * seg, atol=1e-9)

    def test_purity_with_reset_head_state(self):
        sm_a = make_sm(dim=3, slots=4, seed=5)
        sm_b = make_sm(dim=3, slots=4, seed=5)
        m_em = np.array([0.2, -0.7, 0.1])
        sm_a.write(m_em)
        sm_b.write(m_em)
        np.testing.assert_array_equal(sm_a.matrix.data, sm_b.matrix.data)
        assert sm_a.state_hash() == sm_b.state_hash()

    def test_stateful_head_advances(self):
        sm = make_sm(dim=3, slots=4, seed=6)
        h0 = sm.write_hidden.data.copy()
        sm.write(np.ones(3))
        assert not np.array_equal(sm.write_hidden.data, h0)


class TestGradients:
    def test_read_and_write_gradcheck(self):
        rng = np.random.default_rng(7)
        dim, slots = 3, 4
        base = make_sm(dim=dim, slots=slots, seed=7)
        matrix0 = rng.normal(size=(slots, dim))
        c = rng.normal(size=dim)
        m_em = rng.normal(size=dim)

        def read_fn(matrix, head_w, head_b, ctx):
            sm = make_sm(dim=dim, slots=slots, seed=7)
            sm.matrix = matrix
            sm.read_head = LSTMWeights(w=head_w, b=head_b)
            m, _, _ = sm.read(ctx)
            return m

        err = grad_check(read_fn, [matrix0, base.read_head.w.data,
                                   base.read_head.b.data, c], rng=rng)
        assert err < 1e-4

        def write_fn(matrix, head_w, head_b, inp):
            sm = make_sm(dim=dim, slots=slots, seed=7)
            sm.matrix = matrix
            sm.write_head = LSTMWeights(w=head_w, b=head_b)
            sm.write(inp)
            return T.tsum(sm.matrix * sm.matrix)

        err = grad_check(write_fn, [matrix0, base.write_head.w.data,
                                    base.write_head.b.data, m_em], rng=rng)
        assert err < 1e-4
