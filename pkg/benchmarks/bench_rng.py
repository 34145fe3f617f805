#!/usr/bin/env python3
"""Benchmark the compiled replication-RNG kernel against the numpy fallback.

The kernel is the hot inner loop of every Monte Carlo run: filling a
(replications x points) matrix with counter-based per-replication standard
normals.  Both backends must produce bit-identical output; this script
checks that first, then reports throughput for a few shapes, plus the
end-to-end draw_maxima pipeline (RNG + BLAS + reduction).

Usage: python benchmarks/bench_rng.py [--quick]
"""

import argparse
import time

import numpy as np

from sfbm_extremes import engine, rng
from sfbm_extremes.model import sphere_model
from sfbm_extremes.experiments import FullSphere, design_grid


def timeit(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller shapes")
    args = ap.parse_args()

    impls = rng.available_backends()
    print(f"active backend: {rng.active_backend()}; available: {sorted(impls)}")

    out_a = np.empty((200, 4096))
    out_b = np.empty((200, 4096))
    for name, fill in impls.items():
        fill(12345, 17, out_a if name == "python" else out_b)
    if len(impls) == 2:
        same = np.array_equal(out_a, out_b)
        print(f"bit-identical across backends: {same}")
        if not same:
            raise SystemExit("backend mismatch; do not trust the numbers below")

    shapes = [(2000, 256), (2000, 2048)] if args.quick else [
        (20000, 256), (8000, 2048), (2000, 8192)]
    print(f"\n{'shape':>16} " + " ".join(f"{n:>14}" for n in sorted(impls)))
    for reps, npts in shapes:
        out = np.empty((reps, npts))
        row = []
        for name in sorted(impls):
            dt = timeit(impls[name], 7, 0, out)
            row.append(f"{reps * npts / dt / 1e6:10.1f} M/s")
        print(f"{reps:>7} x {npts:<6} " + " ".join(f"{c:>14}" for c in row))

    # end-to-end: excursion maxima on a circle grid
    npts = 512 if args.quick else 2048
    reps = 20000 if args.quick else 50000
    grid = design_grid(FullSphere(1), 2 * np.pi / npts)
    sampler = engine.build_sfbm_sampler(sphere_model(1, 0.5), grid.points, seed=3)
    dt = timeit(lambda: engine.draw_maxima(sampler, reps), repeat=1)
    print(f"\ndraw_maxima {reps} x {npts}: {dt:.2f}s "
          f"({reps * npts / dt / 1e6:.1f} M values/s incl. BLAS)")


if __name__ == "__main__":
    main()
