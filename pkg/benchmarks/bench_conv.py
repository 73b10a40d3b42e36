#!/usr/bin/env python3
"""Benchmark the JIT-compiled CNN convolution kernel against the numpy path.

Usage:
    python3 benchmarks/bench_conv.py
    python3 benchmarks/bench_conv.py --sizes 64 128 256 --repeats 5
    python3 benchmarks/bench_conv.py --output results.json
"""

import argparse
import json
import time

import numpy as np

from dmsp.denoisers import CnnDenoiser
from dmsp.kernels import NUMBA_AVAILABLE, conv2d_periodic
from dmsp.weights import random_weights


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_layer(sizes, repeats, channels=32):
    rng = np.random.default_rng(0)
    w = rng.standard_normal((channels, channels, 3, 3))
    b = rng.standard_normal(channels)
    rows = []
    print(f"\nSingle 3x3 conv layer, {channels} channels")
    print(f"{'size':>6} {'numba (ms)':>12} {'numpy (ms)':>12} {'speedup':>9}")
    for n in sizes:
        x = rng.standard_normal((channels, n, n))
        if NUMBA_AVAILABLE:
            conv2d_periodic(x, w, b, force_backend="numba")  # JIT warmup
            t_nb = time_call(lambda: conv2d_periodic(x, w, b, force_backend="numba"), repeats)
        else:
            t_nb = np.inf
        t_np = time_call(lambda: conv2d_periodic(x, w, b, force_backend="numpy"), repeats)
        speedup = t_np / t_nb if t_nb > 0 else 0.0
        print(f"{n:>6} {1e3 * t_nb:>12.2f} {1e3 * t_np:>12.2f} {speedup:>8.2f}x")
        rows.append({"size": n, "numba_s": t_nb, "numpy_s": t_np, "speedup": speedup})
    return rows


def bench_denoiser(sizes, repeats, depth=5, hidden=32):
    rows = []
    rng = np.random.default_rng(1)
    weights = random_weights(rng, channels=1, depth=depth, hidden=hidden, sigma_train=0.05)
    den = CnnDenoiser(weights)
    print(f"\nFull residual CNN forward ({depth} layers, width {hidden})")
    print(f"{'size':>6} {'numba (ms)':>12} {'numpy (ms)':>12} {'speedup':>9}")
    import dmsp.kernels as kernels

    for n in sizes:
        x = rng.random((1, n, n))
        times = {}
        for backend in ("numba", "numpy"):
            if backend == "numba" and not NUMBA_AVAILABLE:
                times[backend] = np.inf
                continue
            orig = kernels.backend_name
            kernels.backend_name = lambda b=backend: b
            try:
                den.denoise(x)  # warmup / JIT
                times[backend] = time_call(lambda: den.denoise(x), repeats)
            finally:
                kernels.backend_name = orig
        speedup = times["numpy"] / times["numba"] if times["numba"] > 0 else 0.0
        print(f"{n:>6} {1e3 * times['numba']:>12.2f} {1e3 * times['numpy']:>12.2f} {speedup:>8.2f}x")
        rows.append(
            {"size": n, "numba_s": times["numba"], "numpy_s": times["numpy"], "speedup": speedup}
        )
    return rows


def main():
    parser = argparse.ArgumentParser(description="numba vs numpy conv backends")
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--output", help="write results as JSON")
    args = parser.parse_args()

    print(f"numba available: {NUMBA_AVAILABLE}")
    results = {
        "numba_available": NUMBA_AVAILABLE,
        "layer": bench_layer(args.sizes, args.repeats),
        "denoiser": bench_denoiser(args.sizes, args.repeats),
    }
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(results, fh, indent=2)
        print(f"\nwrote {args.output}")


if __name__ == "__main__":
    main()
