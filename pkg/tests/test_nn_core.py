"""Kernel-level contracts: layers, softmax, recurrent cells, Adam, grad checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rallycast.nn import (
    Adam,
    ConfigError,
    ConvBlock,
    Dense,
    GradientError,
    LrSchedule,
    LSTMWeights,
    ShapeError,
    Tensor,
    TreeCellWeights,
    grad_check,
    layer_forward,
    lstm_step,
    softmax_normalize,
    tree_node_update,
)
from rallycast.nn import tensor as T


# -- independent references ---------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_reference(x, h, c, w, b):
    """Plain-NumPy transcription of the gate algebra (i, f, g, o order)."""
    d = h.size
    z = np.concatenate([x, h]) @ w + b
    i = _sigmoid(z[0:d])
    f = _sigmoid(z[d:2 * d])
    g = np.tanh(z[2 * d:3 * d])
    o = _sigmoid(z[3 * d:4 * d])
    c2 = f * c + i * g
    return o * np.tanh(c2), c2


def tree_reference(h_l, h_r, u_l, u_r, wts):
    """Direct transcription of the tree-cell update equations."""
    i = _sigmoid(h_l @ wts.w_hi_l.data + h_r @ wts.w_hi_r.data
                 + u_l @ wts.w_ui_l.data + u_r @ wts.w_ui_r.data)
    f_l = _sigmoid(h_l @ wts.w_hfl_l.data + h_r @ wts.w_hfl_r.data
                   + u_l @ wts.w_ufl_l.data + u_r @ wts.w_ufl_r.data)
    f_r = _sigmoid(h_l @ wts.w_hfr_l.data + h_r @ wts.w_hfr_r.data
                   + u_l @ wts.w_ufr_l.data + u_r @ wts.w_ufr_r.data)
    beta = h_l @ wts.w_hu_l.data + h_r @ wts.w_hu_r.data
    u_p = f_l * u_l + f_r * u_r + i * np.tanh(beta)
    o = _sigmoid(h_l @ wts.w_ho_l.data + h_r @ wts.w_ho_r.data + u_p @ wts.w_uo_p.data)
    return o * np.tanh(u_p), u_p


# -- layer_forward -------------------------------------------------------------------

class TestLayerForward:
    def test_conv_stride_arithmetic(self):
        rng = np.random.default_rng(0)
        block = ConvBlock(3, 8, rng, kernel=4, stride=2)
        out = layer_forward("Ck", np.zeros((1, 64, 64, 3)), block, train=False)
        assert out.shape == (1, 32, 32, 8)

    def test_relu(self):
        out = layer_forward("relu", np.array([-1.0, 0.0, 2.0]), None)
        assert np.array_equal(out.data, [0.0, 0.0, 2.0])

    def test_cdk_eval_equals_ck(self):
        rng = np.random.default_rng(1)
        ck = ConvBlock(2, 4, rng, kernel=3, stride=2)
        cdk = ConvBlock(2, 4, np.random.default_rng(99), kernel=3, stride=2, dropout=0.5)
        cdk.w.data[:] = ck.w.data
        x = np.random.default_rng(2).normal(size=(2, 8, 8, 2))
        a = layer_forward("Ck", x, ck, train=False)
        b = layer_forward("CDk", x, cdk, train=False)
        assert np.array_equal(a.data, b.data)

    def test_shape_mismatch_names_both_shapes(self):
        rng = np.random.default_rng(0)
        block = ConvBlock(3, 8, rng)
        with pytest.raises(ConfigError, match=r"\(1, 8, 8, 2\).*\(N, H, W, 3\)"):
            layer_forward("Ck", np.zeros((1, 8, 8, 2)), block)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown"):
            layer_forward("Qk", np.zeros(3), None)


# -- softmax ----------------------------------------------------------------------------

class TestSoftmaxNormalize:
    def test_uniform(self):
        np.testing.assert_allclose(softmax_normalize([0.0, 0.0, 0.0]), np.ones(3) / 3)

    def test_analytic(self):
        np.testing.assert_allclose(softmax_normalize([np.log(2.0), 0.0]),
                                   [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)

    def test_no_overflow(self):
        # high-precision reference: exp(1000)/(exp(1000)+1) and its complement
        import mpmath
        ref = [float(mpmath.exp(1000) / (mpmath.exp(1000) + 1)),
               float(1 / (mpmath.exp(1000) + 1))]
        out = softmax_normalize([1000.0, 0.0])
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, ref, atol=1e-12)

    def test_empty_errors(self):
        with pytest.raises(ShapeError):
            softmax_normalize([])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12),
           st.floats(-30, 30))
    def test_sum_and_shift_invariance(self, scores, shift):
        base = softmax_normalize(scores)
        assert abs(base.sum() - 1.0) < 1e-6
        assert np.all(base >= 0)
        shifted = softmax_normalize(np.asarray(scores) + shift)
        np.testing.assert_allclose(base, shifted, atol=1e-9)


# -- LSTM step ----------------------------------------------------------------------------

class TestLstmStep:
    def test_zero_weights_closed_form(self):
        rng = np.random.default_rng(0)
        w = LSTMWeights.create(3, 3, rng)
        w.w.data[:] = 0.0
        w.b.data[:] = 0.0
        h, c = lstm_step(np.zeros(3), np.zeros(3), np.zeros(3), w)
        np.testing.assert_array_equal(h.data, np.zeros(3))
        np.testing.assert_array_equal(c.data, np.zeros(3))

    def test_purity(self):
        rng = np.random.default_rng(3)
        w = LSTMWeights.create(4, 4, rng)
        x, h, c = rng.normal(size=4), rng.normal(size=4), rng.normal(size=4)
        out1 = lstm_step(x, h, c, w)
        out2 = lstm_step(x, h, c, w)
        np.testing.assert_array_equal(out1[0].data, out2[0].data)
        np.testing.assert_array_equal(out1[1].data, out2[1].data)

    def test_matches_reference(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            w = LSTMWeights.create(4, 4, rng)
            x, h, c = rng.normal(size=4), rng.normal(size=4), rng.normal(size=4)
            got_h, got_c = lstm_step(x, h, c, w)
            ref_h, ref_c = lstm_reference(x, h, c, w.w.data, w.b.data)
            np.testing.assert_allclose(got_h.data, ref_h, atol=1e-10)
            np.testing.assert_allclose(got_c.data, ref_c, atol=1e-10)

    def test_dim_mismatch(self):
        rng = np.random.default_rng(0)
        w = LSTMWeights.create(3, 3, rng)
        with pytest.raises(ShapeError):
            lstm_step(np.zeros(5), np.zeros(3), np.zeros(3), w)


# -- tree cell ----------------------------------------------------------------------------

class TestTreeCell:
    def test_zero_weights_closed_form(self):
        wts = TreeCellWeights.zeros(1)
        h_p, u_p = tree_node_update(np.zeros(1), np.zeros(1), np.ones(1), np.ones(1), wts)
        np.testing.assert_allclose(u_p.data, [1.0], atol=1e-15)
        np.testing.assert_allclose(h_p.data, [0.5 * np.tanh(1.0)], atol=1e-12)

    def test_swap_symmetry(self):
        rng = np.random.default_rng(5)
        d = 3
        wts = TreeCellWeights.zeros(d)
        # make every gate blind to child order: one shared matrix per (h, u)
        # input within each gate family, with both forget gates identical
        h_shared, u_shared = rng.normal(size=(d, d)), rng.normal(size=(d, d))
        for name in ("w_hi_l", "w_hi_r", "w_hfl_l", "w_hfl_r", "w_hfr_l", "w_hfr_r",
                     "w_hu_l", "w_hu_r", "w_ho_l", "w_ho_r"):
            getattr(wts, name).data[:] = h_shared
        for name in ("w_ui_l", "w_ui_r", "w_ufl_l", "w_ufl_r", "w_ufr_l", "w_ufr_r"):
            getattr(wts, name).data[:] = u_shared
        wts.w_uo_p.data[:] = rng.normal(size=(d, d))
        h_l, h_r = rng.normal(size=d), rng.normal(size=d)
        u_l, u_r = rng.normal(size=d), rng.normal(size=d)
        a = tree_node_update(h_l, h_r, u_l, u_r, wts)
        b = tree_node_update(h_r, h_l, u_r, u_l, wts)
        np.testing.assert_allclose(a[0].data, b[0].data, atol=1e-12)
        np.testing.assert_allclose(a[1].data, b[1].data, atol=1e-12)

    def test_matches_equation_transcription(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            wts = TreeCellWeights.create(3, rng)
            h_l, h_r = rng.normal(size=3), rng.normal(size=3)
            u_l, u_r = rng.normal(size=3), rng.normal(size=3)
            got_h, got_u = tree_node_update(h_l, h_r, u_l, u_r, wts)
            ref_h, ref_u = tree_reference(h_l, h_r, u_l, u_r, wts)
            np.testing.assert_allclose(got_h.data, ref_h, atol=1e-10)
            np.testing.assert_allclose(got_u.data, ref_u, atol=1e-10)

    def test_hidden_bounded(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            wts = TreeCellWeights.create(4, rng)
            args = [rng.normal(size=4) * 3 for _ in range(4)]
            h_p, _ = tree_node_update(*args, wts)
            assert np.all(h_p.data > -1.0) and np.all(h_p.data < 1.0)

    def test_dim_mismatch(self):
        wts = TreeCellWeights.zeros(3)
        with pytest.raises(ShapeError):
            tree_node_update(np.zeros(2), np.zeros(3), np.zeros(3), np.zeros(3), wts)


# -- Adam -------------------------------------------------------------------------------

class TestAdam:
    def test_first_step_is_minus_lr(self):
        p = Tensor(np.array([5.0]), requires_grad=True)
        p.grad = np.array([1.0])
        opt = Adam({"p": p})
        opt.step(lr=0.002)
        assert abs((p.data[0] - 5.0) + 0.002) < 1e-9

    def test_zero_gradient_never_moves(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        opt = Adam({"p": p})
        for _ in range(5):
            p.grad = np.zeros(2)
            opt.step(lr=0.1)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_quadratic_descent_matches_oracle(self):
        # independent scalar transcription of the update rule
        w_ref, m, v = 1.0, 0.0, 0.0
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        ref_losses = [w_ref**2]
        for t in range(1, 4):
            g = 2.0 * w_ref
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            w_ref -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
            ref_losses.append(w_ref**2)
        assert all(b < a for a, b in zip(ref_losses, ref_losses[1:]))

        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = Adam({"w": p})
        losses = [float(p.data[0] ** 2)]
        for _ in range(3):
            opt.zero_grad()
            loss = p * p
            loss.backward(np.ones(1))
            opt.step(lr=lr)
            losses.append(float(p.data[0] ** 2))
        np.testing.assert_allclose(losses, ref_losses, atol=1e-12)

    def test_nonfinite_gradient_names_parameter(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        p.grad = np.array([np.nan])
        opt = Adam({"theta_3": p})
        with pytest.raises(GradientError, match="theta_3"):
            opt.step(lr=0.01)

    def test_schedule(self):
        sched = LrSchedule(epochs1=10, lr1=0.002, epochs2=20, lr2=0.0002)
        assert sched.lr_for_epoch(1) == 0.002
        assert sched.lr_for_epoch(10) == 0.002
        assert sched.lr_for_epoch(11) == 0.0002
        assert sched.lr_for_epoch(30) == 0.0002
        assert sched.total_epochs == 30


# -- grad_check --------------------------------------------------------------------------

class TestGradCheck:
    def test_square(self):
        err = grad_check(lambda x: x * x, [np.array([3.0])])
        assert err < 1e-8

    def test_softmax_jacobian(self):
        rng = np.random.default_rng(8)
        err = grad_check(lambda s: T.softmax(s), [rng.normal(size=5)], rng=rng)
        assert err < 1e-6

    def test_tree_cell_all_weights(self):
        rng = np.random.default_rng(9)
        d = 3
        wts = TreeCellWeights.create(d, rng)
        names = list(wts.params("w").keys())
        states = [rng.normal(size=d) for _ in range(4)]

        def fn(*weight_tensors):
            # grad_check hands us Tensors; rebuild the weight container around them
            fresh = TreeCellWeights(**{n.split(".")[1]: t
                                       for n, t in zip(names, weight_tensors)})
            h_p, u_p = tree_node_update(*states, fresh)
            return T.concat([h_p, u_p], axis=0)

        arrays = [p.data for p in wts.params("w").values()]
        err = grad_check(fn, arrays, rng=rng)
        assert err < 1e-4
