#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the hot paths (batched 1-NN, k-NN, normal estimation, and an
end-to-end D1 computation) through both backends on the same random
clouds, checks that the results agree, and prints median timings with
speedups.

Usage:
    python benchmarks/compare_backends.py --points 200000 --queries 200000
    python benchmarks/compare_backends.py --points 20000 --runs 5
"""

import argparse
import statistics
import time

import numpy as np

from pcmetric import MetricConfig, PointCloud, SpatialIndex, compute_metric, estimate_normals
from pcmetric.backend import numba_available


def timed(fn, runs, warmup=1):
    for _ in range(warmup):
        result = fn()
    samples = []
    for _ in range(runs):
        t0 = time.perf_counter()
        result = fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples), result


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    if isinstance(a, PointCloud):
        return bool(np.array_equal(a.points, b.points)) and (
            a.normals is None or bool(np.allclose(a.normals, b.normals, atol=1e-9))
        )
    if isinstance(a, float):
        return a == b
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=100_000)
    parser.add_argument("--queries", type=int, default=100_000)
    parser.add_argument("--k", type=int, default=12)
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not numba_available():
        parser.error("numba is not importable; nothing to compare against")

    rng = np.random.default_rng(args.seed)
    reference = PointCloud("ref", rng.random((args.points, 3)) * 1000.0)
    decoded = PointCloud("dec", np.round(reference.points * 2) / 2)
    queries = rng.random((args.queries, 3)) * 1000.0

    t0 = time.perf_counter()
    index = SpatialIndex.build(reference)
    build_s = time.perf_counter() - t0
    print(f"clouds: {args.points:,} reference points, {args.queries:,} queries")
    print(f"index build (shared, numpy): {build_s:.3f}s")
    print()

    cases = {
        "nearest_batch": lambda be: index.nearest_batch(queries, backend=be),
        f"knn (k={args.k})": lambda be: index.knn(queries, args.k, backend=be),
        "estimate_normals": lambda be: estimate_normals(reference, args.k, index=index, backend=be),
        "compute_metric D1": lambda be: compute_metric(
            reference, decoded, MetricConfig.d1(1023.0), backend=be
        ).psnr_db,
    }

    width = max(map(len, cases))
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}  match")
    for name, fn in cases.items():
        t_nb, r_nb = timed(lambda: fn("numba"), args.runs)
        t_np, r_np = timed(lambda: fn("numpy"), args.runs, warmup=0)
        match = "yes" if agree(r_nb, r_np) else "NO"
        print(
            f"{name:<{width}}  {t_nb:>9.3f}s  {t_np:>9.3f}s  "
            f"{t_np / t_nb:>7.1f}x  {match}"
        )


if __name__ == "__main__":
    main()
