#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the grid-search objective (exact channel build + Gram eigensolve per
grid point) on the 48x16 broadside scenario for both backends, regardless
of which one NFMIMO_BACKEND selected. Run directly:

    python benchmarks/bench_backends.py [--points 20000]
"""

import argparse
import time

import numpy as np

from nfmimo import ArrayGeometry, Waveband, solve_four_subarrays
from nfmimo import _kernels
from nfmimo.grid_optimizer import _partition_problem


def build_problem(n_points: int):
    w = Waveband.from_ghz(28.0)
    lam = w.wavelength
    tx = ArrayGeometry(16, 1, 0.5 * lam, 0.5 * lam)
    sol = solve_four_subarrays(tx, 12, 12, 256.0 * lam, w)
    base, dirs, bstarts, bcenters = _partition_problem(sol.partition, tx, lam)
    rng = np.random.default_rng(7)
    points = rng.uniform(0.5, 80.0, size=(n_points, dirs.shape[0]))
    tx_local = (np.arange(16) - 7.5)[:, None] * np.array([0.5 * lam, 0.0, 0.0])
    return points, base, dirs, tx_local, w.wavenumber, bstarts, bcenters


def time_backend(fn, args, repeats: int = 3) -> float:
    fn(*args)  # warm-up (JIT compilation for the numba path)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=20000)
    args = parser.parse_args()

    points, base, dirs, tx_local, k0, bstarts, bcenters = build_problem(args.points)
    results = {}
    for model_name, model in (("exact", _kernels.MODEL_EXACT),
                              ("quartic-subarray", _kernels.MODEL_QUARTIC_SUBARRAY)):
        call_args = (points, base, dirs, tx_local, k0, model, bstarts, bcenters)
        row = {}
        row["numpy"] = time_backend(_kernels.grid_neff_numpy, call_args)
        if _kernels.grid_neff_numba is not None:
            row["numba"] = time_backend(_kernels.grid_neff_numba, call_args)
        results[model_name] = row

    print(f"grid points: {args.points}  (48x16 channel + 16x16 eigensolve each)")
    print(f"{'model':<18} {'backend':<8} {'seconds':>9} {'points/s':>12}")
    for model_name, row in results.items():
        for backend, seconds in row.items():
            print(f"{model_name:<18} {backend:<8} {seconds:>9.3f} "
                  f"{args.points / seconds:>12.0f}")
    if "numba" in results["exact"]:
        speedup = results["exact"]["numpy"] / results["exact"]["numba"]
        print(f"\nexact-model speedup numba/numpy: {speedup:.1f}x")


if __name__ == "__main__":
    main()
