"""Channel attention over group-structured feature maps.

A per-channel descriptor is average-pooled over the group and spatial
axes, squeezed through a small two-layer MLP and a sigmoid, and the
resulting gate rescales every (group, spatial) slot of its channel.
Gating per channel (rather than per channel-and-group slot) is what keeps
the surrounding stack equivariant.
"""

from __future__ import annotations

import numpy as np

from .gconv import GFeatureMap, he_uniform
from .nn import linear
from .prng import Prng
from .tensor import Tensor, _node, relu, sigmoid


def _pooled_descriptor(x: Tensor) -> Tensor:
    """Mean over the group and spatial axes, summed in sorted order.

    Sorting canonicalizes the summation order, so the descriptor is
    bit-identical under any permutation of the pooled slots - group-axis
    permutations and exact spatial rotations leave the gates unchanged
    exactly, not just to rounding.
    """
    n, c = x.shape[0], x.shape[1]
    count = x.size // (n * c)
    flat = np.sort(x.data.reshape(n, c, count), axis=2)
    out = _node(flat.sum(axis=2) / count, (x,))
    if out.requires_grad:
        shape = x.shape

        def bwd(g):
            x.accumulate_grad(np.broadcast_to(
                (g / count)[:, :, None, None, None], shape).astype(x.dtype))

        out._backward = bwd
    return out


class ChannelAttentionLayer:
    """Gate weights: sigmoid(W2 relu(W1 d + b1) + b2) for pooled descriptor d.

    The output layer starts at zero with a positive bias, so the gates open
    near 1 and the module begins as a gentle identity instead of injecting
    random per-channel scales into a freshly initialized network.
    """

    def __init__(self, channels: int, reduction: int, prng: Prng, dtype=np.float32):
        if reduction < 1 or channels % reduction:
            raise ValueError(f"channels {channels} not divisible by reduction {reduction}")
        hidden = channels // reduction
        self.reduction = reduction
        self.mlp_w1 = he_uniform((hidden, channels), channels, prng, dtype)
        self.mlp_b1 = Tensor(np.zeros(hidden, dtype=dtype), requires_grad=True)
        self.mlp_w2 = Tensor(np.zeros((channels, hidden), dtype=dtype), requires_grad=True)
        self.mlp_b2 = Tensor(np.full(channels, 2.0, dtype=dtype), requires_grad=True)


def channel_attention(fm: GFeatureMap, layer: ChannelAttentionLayer) -> Tensor:
    """Per-channel gates in (0, 1), shape N x C."""
    d = _pooled_descriptor(fm.tensor)
    h = relu(linear(d, layer.mlp_w1, layer.mlp_b1))
    return sigmoid(linear(h, layer.mlp_w2, layer.mlp_b2))


def apply_attention(gates: Tensor, fm: GFeatureMap) -> GFeatureMap:
    """Broadcast-multiply gates over the group and spatial axes."""
    n, c = gates.shape
    if fm.tensor.shape[0] != n or fm.tensor.shape[1] != c:
        raise ValueError("attention gates do not match the feature map")
    return GFeatureMap(fm.tensor * gates.reshape(n, c, 1, 1, 1), fm.spec)


def largest_divisor_at_most(n: int, cap: int) -> int:
    """Largest divisor of n that is <= cap (>= 1). Scaled channel widths are
    not always divisible by the requested reduction ratio."""
    for d in range(min(cap, n), 0, -1):
        if n % d == 0:
            return d
    return 1
