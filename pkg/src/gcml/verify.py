"""User-facing verification suites: group axioms, layer equivariance,
gradient checks. Each suite returns (name, passed, detail) rows; the CLI
prints them and fails the process if any row fails.
"""

from __future__ import annotations

import numpy as np

from .attention import ChannelAttentionLayer, apply_attention, channel_attention
from .gconv import (GFeatureMap, GroupBatchNormLayer, GroupConvLayer,
                    LiftingConvLayer, gconv, group_batchnorm, group_pool,
                    gspatial_maxpool, lift_conv)
from .groups import act_on_grid, group_spec, regular_perm, rotate_feature_map
from .losses import contrastive_loss, triplet_loss
from .nn import batchnorm, BnStats, conv2d, cross_entropy, global_avgpool, linear, maxpool2d
from .prng import Prng
from .tensor import Tensor, relu, sigmoid

Row = tuple[str, bool, str]


def run_group_suite() -> list[Row]:
    rows: list[Row] = []
    for kind in ("p4", "p4m"):
        spec = group_spec(kind)
        n = spec.order
        ok_closure = all(0 <= spec.compose(g, h) < n for g in range(n) for h in range(n))
        ok_identity = all(spec.compose(0, g) == g and spec.compose(g, 0) == g
                          for g in range(n))
        ok_inverse = all(spec.compose(g, spec.inverse(g)) == 0 for g in range(n))
        triples = 0
        ok_assoc = True
        for g in range(n):
            for h in range(n):
                for k in range(n):
                    triples += 1
                    if spec.compose(spec.compose(g, h), k) != spec.compose(g, spec.compose(h, k)):
                        ok_assoc = False
        rows.append((f"{kind}.closure", ok_closure, f"{n * n} pairs"))
        rows.append((f"{kind}.identity", ok_identity, f"{n} elements"))
        rows.append((f"{kind}.inverse", ok_inverse, f"{n} elements"))
        rows.append((f"{kind}.associativity", ok_assoc, f"{triples} triples"))
        hom_ok = True
        for g in range(n):
            for h in range(n):
                a = act_on_grid(spec, g, 5)
                b = act_on_grid(spec, h, 5)
                composed = b.index_map[a.index_map]
                if not np.array_equal(composed, act_on_grid(spec, spec.compose(g, h), 5).index_map):
                    hom_ok = False
                pa, pb = regular_perm(spec, g), regular_perm(spec, h)
                if not np.array_equal(pa[pb], regular_perm(spec, spec.compose(g, h))):
                    hom_ok = False
        rows.append((f"{kind}.action_homomorphism", hom_ok, f"{n * n} pairs at k=5"))
    return rows


def _rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(b.ravel())
    return float(np.linalg.norm((a - b).ravel()) / (denom if denom > 0 else 1.0))


def equivariance_errors(kind: str = "p4m", dtype=np.float32, trials: int = 20,
                        seed: int = 1234) -> dict[str, float]:
    """Worst relative L2 equivariance error per layer over seeded inputs."""
    spec = group_spec(kind)
    rng = np.random.default_rng(seed)
    prng = Prng(seed)
    lift = LiftingConvLayer(spec, 2, 3, 3, prng, dtype)
    conv = GroupConvLayer(spec, 3, 4, 3, prng, dtype)
    bn = GroupBatchNormLayer(3, dtype)
    attn = ChannelAttentionLayer(3, 1, prng, dtype)
    worst: dict[str, float] = {}

    def track(name: str, err: float) -> None:
        worst[name] = max(worst.get(name, 0.0), err)

    for _ in range(trials):
        x = Tensor(rng.standard_normal((2, 2, 8, 8)).astype(dtype))
        fm = lift_conv(x, lift)
        fmap = Tensor(rng.standard_normal((2, 3, spec.order, 8, 8)).astype(dtype))
        for g in range(spec.order):
            xr = Tensor(rotate_feature_map(x, spec, g).data)
            track("lift_conv", _rel_l2(lift_conv(xr, lift).tensor.data,
                                       rotate_feature_map(fm.tensor, spec, g).data))
            fr = GFeatureMap(Tensor(rotate_feature_map(fmap, spec, g).data), spec)
            base = GFeatureMap(fmap, spec)
            track("gconv", _rel_l2(gconv(fr, conv).tensor.data,
                                   rotate_feature_map(gconv(base, conv).tensor, spec, g).data))
            for training in (True, False):
                y0 = group_batchnorm(base, bn, training).tensor.data
                y1 = group_batchnorm(fr, bn, training).tensor.data
                tag = "group_batchnorm.train" if training else "group_batchnorm.eval"
                track(tag, _rel_l2(y1, rotate_feature_map(y0, spec, g)))
            track("gspatial_maxpool", _rel_l2(
                gspatial_maxpool(fr).tensor.data,
                rotate_feature_map(gspatial_maxpool(base).tensor, spec, g).data))
            gated0 = apply_attention(channel_attention(base, attn), base).tensor.data
            gated1 = apply_attention(channel_attention(fr, attn), fr).tensor.data
            track("channel_attention", _rel_l2(gated1, rotate_feature_map(gated0, spec, g)))
            track("group_pool", _rel_l2(
                group_pool(fr).data,
                rotate_feature_map(group_pool(base).data, spec, g)))
    return worst


def run_equivariance_suite() -> list[Row]:
    rows: list[Row] = []
    for dtype, tol in ((np.float32, 1e-5), (np.float64, 1e-12)):
        errs = equivariance_errors("p4m", dtype)
        for name, err in sorted(errs.items()):
            rows.append((f"p4m.{name}.{np.dtype(dtype).name}", err < tol,
                         f"max rel L2 {err:.3e} (tol {tol:g})"))
    return rows


def gradient_errors(seed: int = 7) -> dict[str, float]:
    """Max relative error of backward() against central differences (f64)."""
    rng = np.random.default_rng(seed)
    prng = Prng(seed)
    spec = group_spec("p4")

    def fd_check(make_loss, tensors: dict[str, Tensor]) -> float:
        loss = make_loss()
        for t in tensors.values():
            t.grad = None
        loss.backward()
        worst = 0.0
        for t in tensors.values():
            analytic = t.grad.copy()
            flat = t.data.reshape(-1)
            fd = np.zeros_like(flat)
            h = 1e-4
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = make_loss().item()
                flat[i] = orig - h
                dn = make_loss().item()
                flat[i] = orig
                fd[i] = (up - dn) / (2 * h)
            denom = max(np.abs(analytic).max(), 1e-6)
            worst = max(worst, float(np.abs(fd.reshape(analytic.shape) - analytic).max() / denom))
        return worst

    out: dict[str, float] = {}

    x = Tensor(rng.standard_normal((2, 2, 6, 6)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 2, 3, 3)) * 0.5, requires_grad=True)
    b = Tensor(rng.standard_normal(3) * 0.1, requires_grad=True)
    tgt = Tensor(rng.standard_normal((2, 3, 6, 6)))
    out["conv2d"] = fd_check(
        lambda: ((conv2d(x, w, b, 1, 1) - tgt) * (conv2d(x, w, b, 1, 1) - tgt)).mean(),
        {"x": x, "w": w, "b": b})

    xp = Tensor(rng.standard_normal((1, 2, 4, 4)), requires_grad=True)
    out["maxpool2d"] = fd_check(lambda: (maxpool2d(xp, 2) * maxpool2d(xp, 2)).mean(), {"x": xp})

    xl = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    wl = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    bl = Tensor(rng.standard_normal(5), requires_grad=True)
    out["linear"] = fd_check(lambda: (linear(xl, wl, bl) * linear(xl, wl, bl)).mean(),
                             {"x": xl, "w": wl, "b": bl})

    xb = Tensor(rng.standard_normal((4, 3, 5, 5)), requires_grad=True)
    gm = Tensor(1.0 + 0.1 * rng.standard_normal(3), requires_grad=True)
    bt = Tensor(0.1 * rng.standard_normal(3), requires_grad=True)
    tb = rng.standard_normal((4, 3, 5, 5))

    def bn_loss():
        st = BnStats(3, np.float64)
        y = batchnorm(xb, gm, bt, st, training=True)
        return ((y - Tensor(tb)) * (y - Tensor(tb))).mean()

    out["batchnorm"] = fd_check(bn_loss, {"x": xb, "gamma": gm, "beta": bt})

    xg = Tensor(rng.standard_normal((1, 2, 4, 4)), requires_grad=True)
    out["global_avgpool"] = fd_check(
        lambda: (global_avgpool(xg) * global_avgpool(xg)).mean(), {"x": xg})

    lo = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
    labels = np.array([0, 2, 4, 1])
    out["cross_entropy"] = fd_check(lambda: cross_entropy(lo, labels), {"logits": lo})

    xs = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    out["relu_sigmoid"] = fd_check(
        lambda: (relu(xs) * sigmoid(xs)).mean(), {"x": xs})

    lift = LiftingConvLayer(spec, 1, 2, 3, prng, np.float64)
    gc = GroupConvLayer(spec, 2, 2, 3, prng, np.float64)
    xe = Tensor(rng.standard_normal((1, 1, 4, 4)), requires_grad=True)

    def gstack_loss():
        fm = lift_conv(xe, lift)
        fm = gconv(fm, gc)
        pooled = global_avgpool(group_pool(fm))
        return (pooled * pooled).mean()

    out["lift_gconv_stack"] = fd_check(
        gstack_loss, {"x": xe, "w_lift": lift.weight, "w_g": gc.weight,
                      "b_lift": lift.bias, "b_g": gc.bias})

    ea = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    ep = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    en = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    out["triplet_loss"] = fd_check(lambda: triplet_loss(ea, ep, en, 0.7),
                                   {"a": ea, "p": ep, "n": en})

    e1 = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    e2 = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    same = np.array([True, False, True, False])
    out["contrastive_loss"] = fd_check(lambda: contrastive_loss(e1, e2, same, 2.5),
                                       {"e1": e1, "e2": e2})

    from .nn import l2_normalize

    xn = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
    tn = Tensor(rng.standard_normal((3, 5)))
    out["l2_normalize"] = fd_check(
        lambda: ((l2_normalize(xn) - tn) * (l2_normalize(xn) - tn)).mean(), {"x": xn})

    attn = ChannelAttentionLayer(4, 2, prng, np.float64)
    attn.mlp_w2.data = 0.3 * rng.standard_normal(attn.mlp_w2.shape)
    xa = Tensor(rng.standard_normal((1, 4, 4, 4, 4)), requires_grad=True)

    def attn_loss():
        fm = GFeatureMap(xa, group_spec("p4"))
        gated = apply_attention(channel_attention(fm, attn), fm)
        return (gated.tensor * gated.tensor).mean()

    out["channel_attention"] = fd_check(
        attn_loss, {"x": xa, "w1": attn.mlp_w1, "b1": attn.mlp_b1,
                    "w2": attn.mlp_w2, "b2": attn.mlp_b2})
    return out


def run_gradient_suite() -> list[Row]:
    rows = []
    for name, err in sorted(gradient_errors().items()):
        rows.append((f"gradcheck.{name}", err < 1e-6, f"max rel err {err:.3e}"))
    return rows


SUITES = {
    "group": run_group_suite,
    "equivariance": run_equivariance_suite,
    "gradient": run_gradient_suite,
}


def run_suites(names: list[str]) -> tuple[list[Row], bool]:
    rows: list[Row] = []
    for name in names:
        rows.extend(SUITES[name]())
    return rows, all(ok for _, ok, _ in rows)
