# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution kernels (direct loops over padded NHWC buffers).

Same contracts as ``conv_numpy``: inputs arrive already padded; gradients are
returned w.r.t. the padded buffer.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def conv2d_forward(cnp.ndarray xp, cnp.ndarray w, stride):
    cdef Py_ssize_t n = xp.shape[0], hp = xp.shape[1], wp = xp.shape[2], cin = xp.shape[3]
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], cout = w.shape[3]
    cdef Py_ssize_t sh = stride[0], sw = stride[1]
    cdef Py_ssize_t oh = (hp - kh) // sh + 1
    cdef Py_ssize_t ow = (wp - kw) // sw + 1

    xp_arr = np.ascontiguousarray(xp, dtype=np.float64)
    w_arr = np.ascontiguousarray(w, dtype=np.float64)
    out_arr = np.zeros((n, oh, ow, cout), dtype=np.float64)

    cdef double[:, :, :, ::1] xv = xp_arr
    cdef double[:, :, :, ::1] wv = w_arr
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, i, j, ki, kj, c, f
    cdef double x_val

    with nogil:
        for b in range(n):
            for i in range(oh):
                for j in range(ow):
                    for ki in range(kh):
                        for kj in range(kw):
                            for c in range(cin):
                                x_val = xv[b, i * sh + ki, j * sw + kj, c]
                                if x_val != 0.0:
                                    for f in range(cout):
                                        out[b, i, j, f] += x_val * wv[ki, kj, c, f]
    return out_arr


def conv2d_backward_input(cnp.ndarray gy, cnp.ndarray w, xp_shape, stride):
    cdef Py_ssize_t n = xp_shape[0], hp = xp_shape[1], wp = xp_shape[2], cin = xp_shape[3]
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], cout = w.shape[3]
    cdef Py_ssize_t sh = stride[0], sw = stride[1]
    cdef Py_ssize_t oh = gy.shape[1], ow = gy.shape[2]

    gy_arr = np.ascontiguousarray(gy, dtype=np.float64)
    w_arr = np.ascontiguousarray(w, dtype=np.float64)
    gxp_arr = np.zeros((n, hp, wp, cin), dtype=np.float64)

    cdef double[:, :, :, ::1] gyv = gy_arr
    cdef double[:, :, :, ::1] wv = w_arr
    cdef double[:, :, :, ::1] gxp = gxp_arr
    cdef Py_ssize_t b, i, j, ki, kj, c, f
    cdef double g_val

    with nogil:
        for b in range(n):
            for i in range(oh):
                for j in range(ow):
                    for f in range(cout):
                        g_val = gyv[b, i, j, f]
                        if g_val != 0.0:
                            for ki in range(kh):
                                for kj in range(kw):
                                    for c in range(cin):
                                        gxp[b, i * sh + ki, j * sw + kj, c] += g_val * wv[ki, kj, c, f]
    return gxp_arr


def conv2d_backward_weights(cnp.ndarray gy, cnp.ndarray xp, w_shape, stride):
    cdef Py_ssize_t kh = w_shape[0], kw = w_shape[1], cin = w_shape[2], cout = w_shape[3]
    cdef Py_ssize_t n = xp.shape[0]
    cdef Py_ssize_t sh = stride[0], sw = stride[1]
    cdef Py_ssize_t oh = gy.shape[1], ow = gy.shape[2]

    xp_arr = np.ascontiguousarray(xp, dtype=np.float64)
    gy_arr = np.ascontiguousarray(gy, dtype=np.float64)
    gw_arr = np.zeros((kh, kw, cin, cout), dtype=np.float64)

    cdef double[:, :, :, ::1] xv = xp_arr
    cdef double[:, :, :, ::1] gyv = gy_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, i, j, ki, kj, c, f
    cdef double x_val

    with nogil:
        for b in range(n):
            for i in range(oh):
                for j in range(ow):
                    for ki in range(kh):
                        for kj in range(kw):
                            for c in range(cin):
                                x_val = xv[b, i * sh + ki, j * sw + kj, c]
                                if x_val != 0.0:
                                    for f in range(cout):
                                        gw[ki, kj, c, f] += x_val * gyv[b, i, j, f]
    return gw_arr
