#!/usr/bin/env python3
"""Compare the compiled and pure convolution kernel backends.

Times forward and backward passes over shapes spanning single-image CAM
work up to full training batches, and prints a GFLOP/s table plus the
speedup of the compiled core over the pure (im2col + BLAS) path.

Run: python benchmarks/bench_kernels.py [--reps N]
"""

import argparse
import time

import numpy as np

from gcml.kernels import pure

try:
    from gcml.kernels import _core as compiled
except ImportError:
    compiled = None

# (tag, batch, channels, size, out_channels, ksize)
SHAPES = [
    ("cam-1img", 1, 16, 16, 16, 3),
    ("tiny", 4, 8, 8, 8, 3),
    ("stage1-p4", 32, 32, 32, 32, 3),
    ("stage1-p4m", 32, 48, 32, 48, 3),
    ("stage2-p4m", 32, 96, 16, 96, 3),
    ("proj-1x1", 32, 48, 16, 96, 1),
]


def bench(mod, x, w, g, reps):
    k = w.shape[2]
    h = x.shape[2]
    t0 = time.perf_counter()
    for _ in range(reps):
        mod.conv2d_forward(x, w, 1, k // 2)
    fwd = (time.perf_counter() - t0) / reps
    t0 = time.perf_counter()
    for _ in range(reps):
        mod.conv2d_grad_weight(g, x, k, 1, k // 2)
        mod.conv2d_grad_input(g, w, h, h, 1, k // 2)
    bwd = (time.perf_counter() - t0) / reps
    return fwd, bwd


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--dtype", choices=["f32", "f64"], default="f32")
    args = parser.parse_args()
    dtype = np.float32 if args.dtype == "f32" else np.float64

    rng = np.random.default_rng(0)
    print(f"{'shape':12s} {'backend':9s} {'fwd ms':>9s} {'bwd ms':>9s} "
          f"{'fwd GF/s':>9s} {'bwd GF/s':>9s}")
    for tag, n, c, size, o, k in SHAPES:
        x = rng.standard_normal((n, c, size, size)).astype(dtype)
        w = rng.standard_normal((o, c, k, k)).astype(dtype)
        g = rng.standard_normal((n, o, size, size)).astype(dtype)
        flops = 2.0 * n * c * o * k * k * size * size
        rows = {}
        backends = [("pure", pure)] + ([("compiled", compiled)] if compiled else [])
        for name, mod in backends:
            fwd, bwd = bench(mod, x, w, g, args.reps)
            rows[name] = (fwd, bwd)
            print(f"{tag:12s} {name:9s} {fwd * 1e3:9.2f} {bwd * 1e3:9.2f} "
                  f"{flops / fwd / 1e9:9.1f} {2 * flops / bwd / 1e9:9.1f}")
        if compiled is not None:
            sf = rows["pure"][0] / rows["compiled"][0]
            sb = rows["pure"][1] / rows["compiled"][1]
            print(f"{tag:12s} {'speedup':9s} {sf:9.2f}x {sb:8.2f}x")
    if compiled is None:
        print("\ncompiled backend not built; showing pure only")


if __name__ == "__main__":
    main()
