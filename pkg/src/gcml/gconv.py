"""Group-equivariant convolution layers.

The first layer lifts a planar image to one feature slice per group
element by convolving with every transformed copy of its filters; deeper
layers convolve group-structured maps with filters transformed over both
the spatial and the group axis. Learned weights exist only in the
canonical filter copy - the transformed banks are gather views, and their
gradients scatter-add back through the same index tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .groups import GroupSpec, act_on_grid
from .nn import BnStats, batchnorm, conv2d, maxpool2d
from .prng import Prng
from .tensor import Tensor, _node


@dataclass
class GFeatureMap:
    """N x C x |G| x H x W activations tied to their symmetry group."""

    tensor: Tensor
    spec: GroupSpec

    def __post_init__(self):
        if self.tensor.ndim != 5:
            raise ValueError("group feature maps are 5-d")
        if self.tensor.shape[2] != self.spec.order:
            raise ValueError(
                f"group axis {self.tensor.shape[2]} != group order {self.spec.order}")


def he_uniform(shape: tuple, fan_in: int, prng: Prng, dtype) -> Tensor:
    limit = (6.0 / fan_in) ** 0.5
    flat = [prng.uniform(-limit, limit) for _ in range(int(np.prod(shape)))]
    return Tensor(np.array(flat, dtype=dtype).reshape(shape), requires_grad=True)


class LiftingConvLayer:
    """Planar input -> group-structured output (one slice per element)."""

    def __init__(self, spec: GroupSpec, in_ch: int, out_ch: int, ksize: int,
                 prng: Prng, dtype=np.float32):
        if ksize % 2 == 0:
            raise ValueError("kernel size must be odd")
        self.spec = spec
        self.ksize = ksize
        self.weight = he_uniform((out_ch, in_ch, ksize, ksize),
                                 in_ch * ksize * ksize, prng, dtype)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)
        self.idx = np.stack([act_on_grid(spec, g, ksize).index_map
                             for g in range(spec.order)])
        self.inv = np.argsort(self.idx, axis=1)


class GroupConvLayer:
    """Group-structured input -> group-structured output."""

    def __init__(self, spec: GroupSpec, in_ch: int, out_ch: int, ksize: int,
                 prng: Prng, dtype=np.float32):
        if ksize % 2 == 0:
            raise ValueError("kernel size must be odd")
        self.spec = spec
        self.ksize = ksize
        n = spec.order
        self.weight = he_uniform((out_ch, in_ch, n, ksize, ksize),
                                 in_ch * n * ksize * ksize, prng, dtype)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)
        kk = ksize * ksize
        idx = np.zeros((n, n * kk), dtype=np.int64)
        for g in range(n):
            spatial = act_on_grid(spec, g, ksize).index_map
            ginv = spec.inverse(g)
            for h in range(n):
                src = spec.compose(ginv, h)
                idx[g, h * kk:(h + 1) * kk] = src * kk + spatial
        self.idx = idx
        self.inv = np.argsort(idx, axis=1)


def _transformed_bank(weight: Tensor, idx: np.ndarray, inv: np.ndarray) -> Tensor:
    """All |G| transformed filter copies, shape (|G|, O, C, S).

    Each row of idx is a bijection on the flattened filter tail, so the
    backward pass is a sum of inverse permutations - every group copy
    contributes gradient to the canonical weights.
    """
    o, c = weight.shape[0], weight.shape[1]
    wf = weight.data.reshape(o, c, -1)
    bank = np.ascontiguousarray(np.moveaxis(wf[:, :, idx], 2, 0))
    out = _node(bank, (weight,))
    if out.requires_grad:

        def bwd(g):
            gw = np.zeros_like(wf)
            for gi in range(idx.shape[0]):
                gw += g[gi][:, :, inv[gi]]
            weight.accumulate_grad(gw.reshape(weight.shape))

        out._backward = bwd
    return out


def lift_conv(x: Tensor, layer: LiftingConvLayer) -> GFeatureMap:
    """First-layer convolution producing one output slice per group element."""
    n_g = layer.spec.order
    o, c, k, _ = layer.weight.shape
    if x.ndim != 4 or x.shape[1] != c:
        raise ValueError(f"lifting conv expects N x {c} x H x W input, got {x.shape}")
    bank = _transformed_bank(layer.weight, layer.idx, layer.inv).reshape(n_g * o, c, k, k)
    y = conv2d(x, bank, bias=None, stride=1, pad=(k - 1) // 2)
    n, _, h, w = y.shape
    y = y.reshape(n, n_g, o, h, w).moveaxis(1, 2)
    y = y + layer.bias.reshape(1, o, 1, 1, 1)
    return GFeatureMap(y, layer.spec)


def gconv(fm: GFeatureMap, layer: GroupConvLayer) -> GFeatureMap:
    """Group convolution: sums planar convolutions over the input group axis."""
    if fm.spec is not layer.spec and fm.spec.kind != layer.spec.kind:
        raise ValueError("feature map group does not match the layer group")
    n_g = layer.spec.order
    o, c, _, k, _ = layer.weight.shape
    x = fm.tensor
    if x.shape[1] != c:
        raise ValueError(f"group conv expects {c} input channels, got {x.shape[1]}")
    bank = _transformed_bank(layer.weight, layer.idx, layer.inv)
    bank = bank.reshape(n_g * o, c * n_g, k, k)
    n, _, _, h, w = x.shape
    y = conv2d(x.reshape(n, c * n_g, h, w), bank, bias=None, stride=1, pad=(k - 1) // 2)
    y = y.reshape(n, n_g, o, h, w).moveaxis(1, 2)
    y = y + layer.bias.reshape(1, o, 1, 1, 1)
    return GFeatureMap(y, layer.spec)


class GroupBatchNormLayer:
    def __init__(self, channels: int, dtype=np.float32,
                 eps: float = 1e-5, momentum: float = 0.1):
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.stats = BnStats(channels, dtype)
        self.eps = eps
        self.momentum = momentum


def group_batchnorm(fm: GFeatureMap, layer: GroupBatchNormLayer,
                    training: bool = True) -> GFeatureMap:
    """Batch norm with statistics shared across the group axis per channel."""
    y = batchnorm(fm.tensor, layer.gamma, layer.beta, layer.stats,
                  eps=layer.eps, momentum=layer.momentum, training=training)
    return GFeatureMap(y, fm.spec)


def group_pool(fm: GFeatureMap) -> Tensor:
    """Max over the group axis: the invariance-producing reduction."""
    return fm.tensor.max(axis=2)


def gspatial_maxpool(fm: GFeatureMap, window: int = 2) -> GFeatureMap:
    """2x2 max pooling applied independently to every group slice."""
    n, c, n_g, h, w = fm.tensor.shape
    if h % window or w % window:
        raise ValueError("spatial dims must be divisible by the pooling window")
    y = maxpool2d(fm.tensor.reshape(n, c * n_g, h, w), window)
    return GFeatureMap(y.reshape(n, c, n_g, h // window, w // window), fm.spec)
