# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled direct-summation convolution kernels.

Plain nested loops with a contiguous inner axis so the C compiler can
vectorize the row updates. Single-threaded and bit-reproducible run to run.
"""

import numpy as np

cimport cython

ctypedef fused real:
    float
    double


def conv2d_forward(x, w, int stride, int pad):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    cdef int n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef int o = w.shape[0], k = w.shape[2]
    cdef int ho = (h + 2 * pad - k) // stride + 1
    cdef int wo = (wd + 2 * pad - k) // stride + 1
    xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
    xp[:, :, pad:pad + h, pad:pad + wd] = x
    out = np.zeros((n, o, ho, wo), dtype=x.dtype)
    if x.dtype == np.float32:
        _conv_fwd[float](xp, w, out, stride)
    else:
        _conv_fwd[double](xp, w, out, stride)
    return out


def conv2d_grad_weight(g, x, int k, int stride, int pad):
    g = np.ascontiguousarray(g)
    x = np.ascontiguousarray(x)
    cdef int n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef int o = g.shape[1]
    xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
    xp[:, :, pad:pad + h, pad:pad + wd] = x
    gw = np.zeros((o, c, k, k), dtype=x.dtype)
    if x.dtype == np.float32:
        _conv_gw[float](g, xp, gw, stride)
    else:
        _conv_gw[double](g, xp, gw, stride)
    return gw


def conv2d_grad_input(g, w, int in_h, int in_w, int stride, int pad):
    g = np.ascontiguousarray(g)
    w = np.ascontiguousarray(w)
    cdef int n = g.shape[0], c = w.shape[1]
    gxp = np.zeros((n, c, in_h + 2 * pad, in_w + 2 * pad), dtype=g.dtype)
    if g.dtype == np.float32:
        _conv_gx[float](g, w, gxp, stride)
    else:
        _conv_gx[double](g, w, gxp, stride)
    if pad == 0:
        return gxp
    return np.ascontiguousarray(gxp[:, :, pad:pad + in_h, pad:pad + in_w])


cdef void _conv_fwd(real[:, :, :, ::1] xp, real[:, :, :, ::1] w,
                    real[:, :, :, ::1] out, int stride) noexcept:
    cdef int n = out.shape[0], o = out.shape[1], ho = out.shape[2], wo = out.shape[3]
    cdef int c = w.shape[1], k = w.shape[2]
    cdef int b, oc, ic, u, v, i, j
    cdef real wv
    cdef real *orow
    cdef real *xrow
    for b in range(n):
        for oc in range(o):
            for ic in range(c):
                for u in range(k):
                    for v in range(k):
                        wv = w[oc, ic, u, v]
                        for i in range(ho):
                            orow = &out[b, oc, i, 0]
                            xrow = &xp[b, ic, i * stride + u, v]
                            if stride == 1:
                                for j in range(wo):
                                    orow[j] += wv * xrow[j]
                            else:
                                for j in range(wo):
                                    orow[j] += wv * xrow[j * stride]


cdef void _conv_gw(real[:, :, :, ::1] g, real[:, :, :, ::1] xp,
                   real[:, :, :, ::1] gw, int stride) noexcept:
    # Four partial sums break the accumulator dependency chain; the
    # summation order is fixed, so results stay reproducible run to run.
    cdef int n = g.shape[0], o = g.shape[1], ho = g.shape[2], wo = g.shape[3]
    cdef int c = gw.shape[1], k = gw.shape[2]
    cdef int b, oc, ic, u, v, i, j, j4 = wo - wo % 4
    cdef real a0, a1, a2, a3
    cdef real *grow
    cdef real *xrow
    for b in range(n):
        for oc in range(o):
            for ic in range(c):
                for u in range(k):
                    for v in range(k):
                        a0 = 0
                        a1 = 0
                        a2 = 0
                        a3 = 0
                        for i in range(ho):
                            grow = &g[b, oc, i, 0]
                            xrow = &xp[b, ic, i * stride + u, v]
                            if stride == 1:
                                for j in range(0, j4, 4):
                                    a0 += grow[j] * xrow[j]
                                    a1 += grow[j + 1] * xrow[j + 1]
                                    a2 += grow[j + 2] * xrow[j + 2]
                                    a3 += grow[j + 3] * xrow[j + 3]
                                for j in range(j4, wo):
                                    a0 += grow[j] * xrow[j]
                            else:
                                for j in range(wo):
                                    a0 += grow[j] * xrow[j * stride]
                        gw[oc, ic, u, v] += a0 + a1 + a2 + a3


cdef void _conv_gx(real[:, :, :, ::1] g, real[:, :, :, ::1] w,
                   real[:, :, :, ::1] gxp, int stride) noexcept:
    cdef int n = g.shape[0], o = g.shape[1], ho = g.shape[2], wo = g.shape[3]
    cdef int c = w.shape[1], k = w.shape[2]
    cdef int b, oc, ic, u, v, i, j
    cdef real wv
    cdef real *grow
    cdef real *xrow
    for b in range(n):
        for oc in range(o):
            for ic in range(c):
                for u in range(k):
                    for v in range(k):
                        wv = w[oc, ic, u, v]
                        for i in range(ho):
                            grow = &g[b, oc, i, 0]
                            xrow = &gxp[b, ic, i * stride + u, v]
                            if stride == 1:
                                for j in range(wo):
                                    xrow[j] += wv * grow[j]
                            else:
                                for j in range(wo):
                                    xrow[j * stride] += wv * grow[j]
