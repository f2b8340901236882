"""Residual backbone with plain, p4 and p4m variants.

The plain variant runs through the same code path with the trivial group,
so one forward implementation serves all three. Channel widths of the
group variants are scaled down (/2 for p4, /sqrt(8) for p4m) to keep the
parameter count close to the plain model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attention import (ChannelAttentionLayer, apply_attention,
                        channel_attention, largest_divisor_at_most)
from .gconv import (GFeatureMap, GroupBatchNormLayer, GroupConvLayer,
                    LiftingConvLayer, gconv, group_batchnorm, group_pool,
                    gspatial_maxpool, lift_conv)
from .groups import group_spec
from .nn import global_avgpool, l2_normalize, linear
from .prng import Prng
from .tensor import Tensor, relu

VARIANT_GROUPS = {"plain": "c1", "p4": "p4", "p4m": "p4m"}


def scaled_width(base_width: int, variant: str) -> int:
    """Channel width that keeps parameter counts comparable across variants."""
    if base_width < 2:
        raise ValueError("base_width must be >= 2")
    if variant == "plain":
        return base_width
    if variant == "p4":
        scaled = base_width / 2.0
    elif variant == "p4m":
        scaled = base_width / np.sqrt(8.0)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return max(1, int(np.floor(scaled + 0.5)))  # round half up


@dataclass
class ModelConfig:
    variant: str = "p4m"
    attention_enabled: bool = True
    stages: tuple[tuple[int, int], ...] = ((2, 32), (2, 64), (2, 128))
    input_channels: int = 1
    input_size: int = 64
    num_classes: int = 10
    embed_dim: int = 64
    attention_reduction: int = 4
    seed: int = 12345
    dtype: str = "f32"

    def __post_init__(self):
        if self.variant not in VARIANT_GROUPS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.dtype not in ("f32", "f64"):
            raise ValueError("dtype must be f32 or f64")
        pools = len(self.stages) - 1
        if self.input_size % (2 ** pools):
            raise ValueError(f"input_size {self.input_size} not divisible by 2^{pools}")
        for blocks, base in self.stages:
            if blocks < 1:
                raise ValueError("every stage needs at least one block")
            if scaled_width(base, self.variant) < 1:
                raise ValueError("scaled width fell below 1")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "f32" else np.float64

    def widths(self) -> list[int]:
        return [scaled_width(base, self.variant) for _, base in self.stages]


class LinearLayer:
    def __init__(self, in_dim: int, out_dim: int, prng: Prng, dtype):
        from .gconv import he_uniform

        self.weight = he_uniform((out_dim, in_dim), in_dim, prng, dtype)
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)


class ResidualBlock:
    """Two 3x3 group convs with batch norm; 1x1 projection when widths differ.

    The residual branch's final norm starts at gamma 0, so every block is an
    identity map at initialization - the standard zero-init-residual recipe,
    which keeps small-scale training stable across seeds.
    """

    def __init__(self, spec, in_ch: int, out_ch: int, prng: Prng, dtype):
        self.conv1 = GroupConvLayer(spec, in_ch, out_ch, 3, prng, dtype)
        self.bn1 = GroupBatchNormLayer(out_ch, dtype)
        self.conv2 = GroupConvLayer(spec, out_ch, out_ch, 3, prng, dtype)
        self.bn2 = GroupBatchNormLayer(out_ch, dtype)
        self.bn2.gamma.data[...] = 0.0
        if in_ch != out_ch:
            self.proj = GroupConvLayer(spec, in_ch, out_ch, 1, prng, dtype)
            self.bn_proj = GroupBatchNormLayer(out_ch, dtype)
        else:
            self.proj = None
            self.bn_proj = None

    def forward(self, fm: GFeatureMap, training: bool) -> GFeatureMap:
        y = group_batchnorm(gconv(fm, self.conv1), self.bn1, training)
        y = GFeatureMap(relu(y.tensor), y.spec)
        y = group_batchnorm(gconv(y, self.conv2), self.bn2, training)
        if self.proj is not None:
            skip = group_batchnorm(gconv(fm, self.proj), self.bn_proj, training)
        else:
            skip = fm
        return GFeatureMap(relu(y.tensor + skip.tensor), y.spec)


@dataclass
class Stage:
    blocks: list[ResidualBlock]
    attn: ChannelAttentionLayer | None = field(default=None)


class Model:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.spec = group_spec(VARIANT_GROUPS[config.variant])
        dtype = config.np_dtype
        prng = Prng(config.seed)
        widths = config.widths()

        self.stem_conv = LiftingConvLayer(self.spec, config.input_channels,
                                          widths[0], 3, prng, dtype)
        self.stem_bn = GroupBatchNormLayer(widths[0], dtype)
        self.stages: list[Stage] = []
        in_ch = widths[0]
        for (blocks, _), width in zip(config.stages, widths):
            stage_blocks = []
            for _ in range(blocks):
                stage_blocks.append(ResidualBlock(self.spec, in_ch, width, prng, dtype))
                in_ch = width
            attn = None
            if config.attention_enabled:
                r = largest_divisor_at_most(width, config.attention_reduction)
                attn = ChannelAttentionLayer(width, r, prng, dtype)
            self.stages.append(Stage(stage_blocks, attn))
        self.head_cls = LinearLayer(in_ch, config.num_classes, prng, dtype)
        self.head_emb = LinearLayer(in_ch, config.embed_dim, prng, dtype)
        self.phase1_done = False

    # -- parameter / buffer registry ----------------------------------------

    def _walk(self):
        yield "stem.conv", self.stem_conv
        yield "stem.bn", self.stem_bn
        for si, stage in enumerate(self.stages):
            for bi, block in enumerate(stage.blocks):
                base = f"stage{si}.block{bi}"
                yield f"{base}.conv1", block.conv1
                yield f"{base}.bn1", block.bn1
                yield f"{base}.conv2", block.conv2
                yield f"{base}.bn2", block.bn2
                if block.proj is not None:
                    yield f"{base}.proj", block.proj
                    yield f"{base}.bn_proj", block.bn_proj
            if stage.attn is not None:
                yield f"stage{si}.attn", stage.attn
        yield "head_cls", self.head_cls
        yield "head_emb", self.head_emb

    def named_parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for name, layer in self._walk():
            if isinstance(layer, (LiftingConvLayer, GroupConvLayer)):
                params[f"{name}.weight"] = layer.weight
                params[f"{name}.bias"] = layer.bias
            elif isinstance(layer, GroupBatchNormLayer):
                params[f"{name}.gamma"] = layer.gamma
                params[f"{name}.beta"] = layer.beta
            elif isinstance(layer, ChannelAttentionLayer):
                params[f"{name}.mlp_w1"] = layer.mlp_w1
                params[f"{name}.mlp_b1"] = layer.mlp_b1
                params[f"{name}.mlp_w2"] = layer.mlp_w2
                params[f"{name}.mlp_b2"] = layer.mlp_b2
            elif isinstance(layer, LinearLayer):
                params[f"{name}.weight"] = layer.weight
                params[f"{name}.bias"] = layer.bias
        return params

    def named_buffers(self) -> dict[str, np.ndarray]:
        buffers: dict[str, np.ndarray] = {}
        for name, layer in self._walk():
            if isinstance(layer, GroupBatchNormLayer):
                buffers[f"{name}.running_mean"] = layer.stats.mean
                buffers[f"{name}.running_var"] = layer.stats.var
        buffers["meta.phase1_done"] = np.array(
            [1.0 if self.phase1_done else 0.0], dtype=np.float32)
        return buffers

    def param_count(self) -> int:
        return sum(p.data.size for p in self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.named_parameters().values():
            p.grad = None

    # -- forward passes ------------------------------------------------------

    def _prepare(self, batch) -> Tensor:
        x = batch if isinstance(batch, Tensor) else Tensor(
            np.asarray(batch, dtype=self.config.np_dtype))
        if x.dtype != self.config.np_dtype:
            x = Tensor(x.data.astype(self.config.np_dtype))
        if x.ndim != 4 or x.shape[1] != self.config.input_channels:
            raise ValueError(f"expected N x {self.config.input_channels} x S x S input, "
                             f"got {x.shape}")
        if x.shape[2] != self.config.input_size or x.shape[3] != self.config.input_size:
            raise ValueError(f"input spatial size {x.shape[2]}x{x.shape[3]} != "
                             f"configured {self.config.input_size}")
        return x

    def _trunk(self, x: Tensor, training: bool) -> GFeatureMap:
        fm = lift_conv(x, self.stem_conv)
        fm = group_batchnorm(fm, self.stem_bn, training)
        fm = GFeatureMap(relu(fm.tensor), fm.spec)
        for si, stage in enumerate(self.stages):
            if si > 0:
                fm = gspatial_maxpool(fm, 2)
            for block in stage.blocks:
                fm = block.forward(fm, training)
            if stage.attn is not None:
                fm = apply_attention(channel_attention(fm, stage.attn), fm)
        return fm

    def forward_features(self, batch, training: bool = False):
        """Returns (last group feature map, pooled planar map, pooled vector)."""
        x = self._prepare(batch)
        fm = self._trunk(x, training)
        planar = group_pool(fm)
        pooled = global_avgpool(planar)
        return fm, planar, pooled

    def forward_classify(self, batch, training: bool = False) -> Tensor:
        _, _, pooled = self.forward_features(batch, training)
        return linear(pooled, self.head_cls.weight, self.head_cls.bias)

    def forward_embed(self, batch, training: bool = False) -> Tensor:
        _, _, pooled = self.forward_features(batch, training)
        return l2_normalize(linear(pooled, self.head_emb.weight, self.head_emb.bias))


def build_model(config: ModelConfig) -> Model:
    return Model(config)


def param_count(model: Model) -> int:
    return model.param_count()
