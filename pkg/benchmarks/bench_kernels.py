"""Compare the compiled and pure-Python kernels on workloads sized like training and evaluation.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from planeformer import _kernels


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(rng):
    # matching: a batch of 8 images, K = 20 slots each
    costs = [rng.uniform(0, 10, (20, 20)) for _ in range(8)]
    # segmentation: one 256x192 embedding map against 8 kept instances
    pixels = rng.normal(size=(256 * 192, 8))
    centers = rng.normal(size=(8, 8))
    # metrics: contingency of two 256x192 label maps
    a = rng.integers(0, 11, 256 * 192)
    b = rng.integers(0, 11, 256 * 192)
    return {
        "linear_sum_assignment (8 x 20x20)": lambda k: [k.linear_sum_assignment(c) for c in costs],
        "nearest_assign (256x192, 8 inst)": lambda k: k.nearest_assign(pixels, centers, 1.0),
        "contingency (256x192, 11x11)": lambda k: k.contingency(a, b, 11, 11),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; reinstall with Cython available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':38s} {'cython (ms)':>12s} {'python (ms)':>12s} {'speedup':>8s}")
    for name, run in workloads(rng).items():
        fast = best_time(lambda: run(_kernels.compiled), args.repeat)
        slow = best_time(lambda: run(_kernels.pure), max(1, args.repeat // 2))
        print(f"{name:38s} {1e3 * fast:12.3f} {1e3 * slow:12.3f} {slow / fast:7.1f}x")


if __name__ == "__main__":
    main()
