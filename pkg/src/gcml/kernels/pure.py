"""Pure-numpy convolution kernels (im2col + GEMM).

Fallback used when the compiled extension is unavailable. Must agree with
the compiled direct-summation kernels to 1e-12 relative in float64.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    n, c, h, w = x.shape
    out = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    out[:, :, pad : pad + h, pad : pad + w] = x
    return out


def _windows(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    """View of shape (N, C, Ho, Wo, k, k) over the padded input."""
    xp = _pad(x, pad)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    if stride > 1:
        win = win[:, :, ::stride, ::stride]
    return win


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    win = _windows(x, w.shape[2], stride, pad)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, O)
    return np.ascontiguousarray(np.moveaxis(out, 3, 1))


def conv2d_grad_weight(
    g: np.ndarray, x: np.ndarray, k: int, stride: int, pad: int
) -> np.ndarray:
    win = _windows(x, k, stride, pad)
    # (N,O,Ho,Wo) x (N,C,Ho,Wo,k,k) -> (O,C,k,k)
    return np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))


def conv2d_grad_input(
    g: np.ndarray, w: np.ndarray, in_h: int, in_w: int, stride: int, pad: int
) -> np.ndarray:
    n, _, ho, wo = g.shape
    _, c, k, _ = w.shape
    gxp = np.zeros((n, c, in_h + 2 * pad, in_w + 2 * pad), dtype=g.dtype)
    for u in range(k):
        for v in range(k):
            # (N,O,Ho,Wo) x (O,C) -> (N,Ho,Wo,C)
            contrib = np.tensordot(g, w[:, :, u, v], axes=([1], [0]))
            gxp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += (
                np.moveaxis(contrib, 3, 1)
            )
    if pad == 0:
        return gxp
    return np.ascontiguousarray(gxp[:, :, pad : pad + in_h, pad : pad + in_w])
