"""Pure NumPy convolution kernels (im2col + BLAS).

Layouts: activations NHWC, weights (KH, KW, Cin, Cout).  All entry points
take an already-padded input; padding/cropping happens once at the op layer so
the buffers can be reused between the forward and both backward passes.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(xp, w, stride):
    """xp: padded input (N, Hp, Wp, Cin); returns (N, OH, OW, Cout)."""
    n = xp.shape[0]
    kh, kw, cin, cout = w.shape
    sh, sw = stride
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    oh, ow = win.shape[1], win.shape[2]
    # win: (N, OH, OW, C, KH, KW) -> cols (N*OH*OW, KH*KW*C) matching w order
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * oh * ow, kh * kw * cin)
    y = cols @ w.reshape(kh * kw * cin, cout)
    return y.reshape(n, oh, ow, cout)


def conv2d_backward_input(gy, w, xp_shape, stride):
    """Gradient w.r.t. the *padded* input buffer of shape ``xp_shape``."""
    kh, kw, cin, cout = w.shape
    sh, sw = stride
    oh, ow = gy.shape[1], gy.shape[2]
    gxp = np.zeros(xp_shape, dtype=gy.dtype)
    for i in range(kh):
        for j in range(kw):
            contrib = gy @ w[i, j].T          # (N, OH, OW, Cin)
            gxp[:, i:i + sh * oh:sh, j:j + sw * ow:sw, :] += contrib
    return gxp


def conv2d_backward_weights(gy, xp, w_shape, stride):
    """Gradient w.r.t. weights given the padded input buffer."""
    kh, kw, cin, cout = w_shape
    n = xp.shape[0]
    sh, sw = stride
    oh, ow = gy.shape[1], gy.shape[2]
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, :oh * sh:sh, :ow * sw:sw]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * oh * ow, kh * kw * cin)
    gw = cols.T @ gy.reshape(n * oh * ow, cout)
    return gw.reshape(kh, kw, cin, cout)
