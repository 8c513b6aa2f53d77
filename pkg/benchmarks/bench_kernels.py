"""Time the numba and numpy kernels on synthetic inputs.

    python benchmarks/bench_kernels.py [--rows 200000] [--repeat 5]

The first numba call compiles (or loads from cache); it is timed
separately and excluded from the steady-state numbers.
"""
import argparse
import time

import numpy as np

from hdbi import kernels
from hdbi._accel import HAS_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.rows
    ratios = rng.uniform(0, 2, (n, 6))
    rows = rng.integers(0, n // 10, n * 8)
    cols = rng.integers(0, 7, n * 8)
    vals = rng.uniform(0, 500, n * 8)
    seg_values = rng.uniform(0, 1500, (n, 7))
    weights = rng.uniform(1e4, 1e9, n)
    seg = rng.integers(0, 2000, n)

    cases = {
        "hdbi_rows": lambda b: kernels.hdbi_rows(ratios, backend=b),
        "scatter_sum": lambda b: kernels.scatter_sum(rows, cols, vals, (n // 10, 7), backend=b),
        "weighted_segment_mean": lambda b: kernels.weighted_segment_mean(seg_values, weights, seg, 2000, backend=b),
    }
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    print(f"{'kernel':<24}{'backend':<8}{'first call':>12}{'best':>12}")
    for name, fn in cases.items():
        results = {}
        for b in backends:
            t0 = time.perf_counter()
            results[b] = fn(b)
            first = time.perf_counter() - t0
            best = best_of(lambda: fn(b), args.repeat)
            print(f"{name:<24}{b:<8}{first * 1e3:>10.1f}ms{best * 1e3:>10.1f}ms")
        if len(results) == 2:
            a, c = results["numpy"], results["numba"]
            same = all(np.array_equal(x, y, equal_nan=True) for x, y in zip(*(r if isinstance(r, tuple) else (r,) for r in (a, c))))
            print(f"{'':<24}bit-identical: {same}")
    if not HAS_NUMBA:
        print("numba unavailable or disabled (HDBI_DISABLE_NUMBA); numpy only")


if __name__ == "__main__":
    main()
