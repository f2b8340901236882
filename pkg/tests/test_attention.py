import numpy as np
import pytest

from gcml.attention import (ChannelAttentionLayer, apply_attention,
                            channel_attention, largest_divisor_at_most)
from gcml.gconv import GFeatureMap, GroupConvLayer, LiftingConvLayer, gconv, lift_conv
from gcml.groups import group_spec, rotate_feature_map
from gcml.prng import Prng
from gcml.tensor import Tensor


def make_fm(spec, c=4, seed=0):
    rng = np.random.default_rng(seed)
    return GFeatureMap(Tensor(rng.standard_normal((2, c, spec.order, 6, 6))), spec)


def test_reduction_must_divide_channels():
    with pytest.raises(ValueError):
        ChannelAttentionLayer(6, 4, Prng(0))


def test_zero_mlp_gives_half_gates():
    spec = group_spec("p4")
    layer = ChannelAttentionLayer(4, 2, Prng(1), np.float64)
    for t in (layer.mlp_w1, layer.mlp_b1, layer.mlp_w2, layer.mlp_b2):
        t.data[...] = 0.0
    gates = channel_attention(make_fm(spec), layer)
    assert np.all(gates.data == 0.5)


def test_gates_in_open_unit_interval():
    spec = group_spec("p4m")
    layer = ChannelAttentionLayer(4, 2, Prng(2), np.float64)
    gates = channel_attention(make_fm(spec, seed=3), layer).data
    assert np.all(gates > 0) and np.all(gates < 1)


def test_group_axis_permutation_leaves_gates_unchanged():
    spec = group_spec("p4m")
    layer = ChannelAttentionLayer(4, 2, Prng(4), np.float64)
    fm = make_fm(spec, seed=5)
    base = channel_attention(fm, layer).data
    perm = np.roll(np.arange(spec.order), 3)
    permuted = GFeatureMap(Tensor(fm.tensor.data[:, :, perm]), spec)
    assert np.array_equal(channel_attention(permuted, layer).data, base)


def test_spatial_rotation_leaves_gates_unchanged_exactly_f64():
    spec = group_spec("p4m")
    layer = ChannelAttentionLayer(4, 2, Prng(6), np.float64)
    fm = make_fm(spec, seed=7)
    base = channel_attention(fm, layer).data
    for g in range(spec.order):
        rot = GFeatureMap(Tensor(rotate_feature_map(fm.tensor, spec, g).data), spec)
        got = channel_attention(rot, layer).data
        assert np.array_equal(got, base)


def test_matches_direct_formula_oracle():
    spec = group_spec("p4")
    layer = ChannelAttentionLayer(4, 2, Prng(8), np.float64)
    fm = make_fm(spec, seed=9)
    got = channel_attention(fm, layer).data
    d = fm.tensor.data.mean(axis=(2, 3, 4))
    hidden = np.maximum(d @ layer.mlp_w1.data.T + layer.mlp_b1.data, 0.0)
    logits = hidden @ layer.mlp_w2.data.T + layer.mlp_b2.data
    want = 1.0 / (1.0 + np.exp(-logits))
    assert np.abs(got - want).max() < 1e-12


def test_apply_attention_identity_and_zero():
    spec = group_spec("p4")
    fm = make_fm(spec, seed=10)
    ones = Tensor(np.ones((2, 4)))
    assert np.array_equal(apply_attention(ones, fm).tensor.data, fm.tensor.data)
    zeros = Tensor(np.zeros((2, 4)))
    assert np.all(apply_attention(zeros, fm).tensor.data == 0)


def test_apply_attention_shape_mismatch():
    spec = group_spec("p4")
    fm = make_fm(spec, seed=11)
    with pytest.raises(ValueError):
        apply_attention(Tensor(np.ones((2, 5))), fm)


def test_attention_composite_is_equivariant():
    spec = group_spec("p4m")
    prng = Prng(12)
    lift = LiftingConvLayer(spec, 1, 3, 3, prng, np.float64)
    gc = GroupConvLayer(spec, 3, 4, 3, prng, np.float64)
    attn = ChannelAttentionLayer(4, 2, prng, np.float64)
    rng = np.random.default_rng(13)
    x = Tensor(rng.standard_normal((1, 1, 8, 8)))

    def net(t):
        fm = gconv(lift_conv(t, lift), gc)
        return apply_attention(channel_attention(fm, attn), fm).tensor.data

    base = net(x)
    for g in range(spec.order):
        xr = Tensor(rotate_feature_map(x, spec, g).data)
        got = net(xr)
        want = rotate_feature_map(base, spec, g)
        err = np.linalg.norm((got - want).ravel()) / np.linalg.norm(want.ravel())
        assert err < 1e-12


def test_largest_divisor_helper():
    assert largest_divisor_at_most(16, 16) == 16
    assert largest_divisor_at_most(11, 4) == 1
    assert largest_divisor_at_most(12, 5) == 4
    assert largest_divisor_at_most(45, 16) == 15
