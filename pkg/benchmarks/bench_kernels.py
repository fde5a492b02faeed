"""Timing comparison between the compiled and pure kernel backends.

Runs each hot kernel on sizes representative of a real training round
(item tables in the tens of thousands, centroid counts in the hundreds)
and prints a table of per-call times plus the speedup of the compiled
extension over the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fedsemrec._kernels import pure

try:
    from fedsemrec._kernels import _core
except ImportError:
    _core = None


def _time(fn, *args, repeats=5):
    """Best-of-N wall time in seconds; best-of filters scheduler noise."""
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_adam(backend, rng, repeats):
    param = rng.normal(size=(40000, 300)).astype(np.float32)
    grad = rng.normal(size=param.shape).astype(np.float32)
    m = np.zeros_like(param)
    v = np.zeros_like(param)
    return _time(backend.adam_step, param, grad, m, v,
                 0.001, 0.9, 0.999, 1e-8, 3, repeats=repeats)


def bench_assign(backend, rng, repeats):
    points = rng.normal(size=(20000, 300)).astype(np.float32)
    centroids = rng.normal(size=(120, 300)).astype(np.float32)
    return _time(backend.assign_nearest, points, centroids, repeats=repeats)


def bench_update(backend, rng, repeats):
    points = rng.normal(size=(20000, 300)).astype(np.float32)
    centroids = rng.normal(size=(120, 300)).astype(np.float32)
    labels = pure.assign_nearest(points, centroids)
    return _time(backend.weighted_centroid_update, points, labels,
                 centroids, 1e-8, repeats=repeats)


BENCHES = [
    ("adam_step 40000x300", bench_adam),
    ("assign_nearest 20000x300 k=120", bench_assign),
    ("weighted_update 20000x300 k=120", bench_update),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per kernel (best is reported)")
    args = parser.parse_args()

    if _core is None:
        print("compiled extension not built; run  pip install -e . "
              "--no-build-isolation  first")

    header = f"{'kernel':<34}{'pure (ms)':>12}{'cython (ms)':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, bench in BENCHES:
        rng = np.random.default_rng(0)
        t_pure = bench(pure, rng, args.repeats)
        if _core is not None:
            rng = np.random.default_rng(0)
            t_core = bench(_core, rng, args.repeats)
            print(f"{name:<34}{t_pure * 1e3:>12.2f}{t_core * 1e3:>14.2f}"
                  f"{t_pure / t_core:>9.2f}x")
        else:
            print(f"{name:<34}{t_pure * 1e3:>12.2f}{'-':>14}{'-':>10}")


if __name__ == "__main__":
    main()
