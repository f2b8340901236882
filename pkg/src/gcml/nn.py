"""Network layers on top of the tensor engine.

conv2d routes through the kernel backend (compiled or pure); everything
else is plain numpy. All backward passes are hand-derived closed forms.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .tensor import Tensor, _node


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of N x C x H x W input with O x C x k x k filters."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError("conv2d expects 4-d input and weight")
    n, c, h, w = x.shape
    o, c2, k, k2 = weight.shape
    if c != c2 or k != k2:
        raise ValueError(f"conv2d shape mismatch: input {x.shape}, weight {weight.shape}")
    if k % 2 == 0:
        raise ValueError("conv2d requires odd kernel size")
    if x.dtype != weight.dtype:
        raise ValueError("conv2d dtype mismatch")
    if (h + 2 * pad - k) % stride or (w + 2 * pad - k) % stride:
        raise ValueError("conv2d output size is not integral")
    out_data = kernels.conv2d_forward(x.data, weight.data, stride, pad)
    if bias is not None:
        if bias.shape != (o,):
            raise ValueError("conv2d bias must have one entry per output channel")
        out_data = out_data + bias.data.reshape(1, o, 1, 1)
    parents = (x, weight) if bias is None else (x, weight, bias)
    out = _node(out_data, parents)
    if out.requires_grad:

        def bwd(g):
            g = np.ascontiguousarray(g)
            if x.requires_grad:
                x.accumulate_grad(kernels.conv2d_grad_input(g, weight.data, h, w, stride, pad))
            if weight.requires_grad:
                weight.accumulate_grad(kernels.conv2d_grad_weight(g, x.data, k, stride, pad))
            if bias is not None and bias.requires_grad:
                bias.accumulate_grad(g.sum(axis=(0, 2, 3)))

        out._backward = bwd
    return out


def maxpool2d(x: Tensor, window: int) -> Tensor:
    """Non-overlapping max pooling (stride == window).

    Gradient goes to the argmax of each window, first entry in row-major
    order on ties.
    """
    if x.ndim != 4:
        raise ValueError("maxpool2d expects a 4-d tensor")
    n, c, h, w = x.shape
    if h % window or w % window:
        raise ValueError(f"spatial dims {h}x{w} not divisible by window {window}")
    ho, wo = h // window, w // window
    tiles = x.data.reshape(n, c, ho, window, wo, window)
    tiles = np.ascontiguousarray(tiles.transpose(0, 1, 2, 4, 3, 5)).reshape(
        n, c, ho, wo, window * window)
    idx = np.argmax(tiles, axis=-1)
    out = _node(np.take_along_axis(tiles, idx[..., None], -1)[..., 0], (x,))
    if out.requires_grad:

        def bwd(g):
            gt = np.zeros_like(tiles)
            np.put_along_axis(gt, idx[..., None], g[..., None], -1)
            gt = gt.reshape(n, c, ho, wo, window, window).transpose(0, 1, 2, 4, 3, 5)
            x.accumulate_grad(gt.reshape(n, c, h, w))

        out._backward = bwd
    return out


def global_avgpool(x: Tensor) -> Tensor:
    """Mean over the spatial axes: N x C x H x W -> N x C."""
    if x.ndim != 4:
        raise ValueError("global_avgpool expects a 4-d tensor")
    return x.mean(axis=(2, 3))


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map N x D_in -> N x D_out with weight D_out x D_in."""
    if x.ndim != 2:
        raise ValueError("linear expects a 2-d input")
    if x.shape[1] != weight.shape[1]:
        raise ValueError(f"linear shape mismatch: {x.shape} vs weight {weight.shape}")
    out = _node(x.data @ weight.data.T + bias.data, (x, weight, bias))
    if out.requires_grad:

        def bwd(g):
            if x.requires_grad:
                x.accumulate_grad(g @ weight.data)
            if weight.requires_grad:
                weight.accumulate_grad(g.T @ x.data)
            if bias.requires_grad:
                bias.accumulate_grad(g.sum(axis=0))

        out._backward = bwd
    return out


class BnStats:
    """Running batch-norm statistics. Not learned; saved in checkpoints."""

    def __init__(self, channels: int, dtype=np.float32):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)
        self.initialized = False


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, stats: BnStats,
              eps: float = 1e-5, momentum: float = 0.1,
              training: bool = True) -> Tensor:
    """Normalize over every axis except channel axis 1.

    Train mode uses batch statistics (biased variance) and folds them into
    the running stats with factor `momentum`; eval mode uses the running
    stats and requires at least one prior train-mode call (or a loaded
    checkpoint).
    """
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError("gamma/beta must match the channel count")
    axes = tuple(a for a in range(x.ndim) if a != 1)
    bshape = tuple(c if a == 1 else 1 for a in range(x.ndim))
    if training:
        mu = x.data.mean(axis=axes)
        var = ((x.data - mu.reshape(bshape)) ** 2).mean(axis=axes)
        stats.mean = ((1.0 - momentum) * stats.mean + momentum * mu).astype(stats.mean.dtype)
        stats.var = ((1.0 - momentum) * stats.var + momentum * var).astype(stats.var.dtype)
        stats.initialized = True
    else:
        if not stats.initialized:
            raise RuntimeError("batchnorm eval mode before any train-mode call")
        mu, var = stats.mean.astype(x.dtype), stats.var.astype(x.dtype)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(bshape)) * inv_std.reshape(bshape)
    out = _node(gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape),
                (x, gamma, beta))
    if out.requires_grad:

        def bwd(g):
            if gamma.requires_grad:
                gamma.accumulate_grad((g * xhat).sum(axis=axes))
            if beta.requires_grad:
                beta.accumulate_grad(g.sum(axis=axes))
            if x.requires_grad:
                gxh = g * gamma.data.reshape(bshape)
                if training:
                    gx = (gxh - gxh.mean(axis=axes, keepdims=True)
                          - xhat * (gxh * xhat).mean(axis=axes, keepdims=True))
                    gx *= inv_std.reshape(bshape)
                else:
                    gx = gxh * inv_std.reshape(bshape)
                x.accumulate_grad(gx)

        out._backward = bwd
    return out


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log softmax probability of the true class."""
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError("labels must be a 1-d array matching the batch")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError("label out of range")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(n), labels].mean()
    out = _node(np.asarray(loss, dtype=logits.dtype), (logits,))
    if out.requires_grad:

        def bwd(g):
            p = np.exp(log_probs)
            p[np.arange(n), labels] -= 1.0
            logits.accumulate_grad(g * p / n)

        out._backward = bwd
    return out


def l2_normalize(x: Tensor, eps: float = 0.0) -> Tensor:
    """Scale rows to unit Euclidean norm; all-zero rows stay zero."""
    if x.ndim != 2:
        raise ValueError("l2_normalize expects a 2-d tensor")
    norms = np.sqrt((x.data ** 2).sum(axis=1, keepdims=True))
    safe = np.where(norms > eps, norms, 1.0)
    y = x.data / safe
    out = _node(y, (x,))
    if out.requires_grad:

        def bwd(g):
            dot = (g * y).sum(axis=1, keepdims=True)
            x.accumulate_grad((g - y * dot) / safe)

        out._backward = bwd
    return out
