#!/usr/bin/env python3
"""Benchmark the jitted kernel lane against the numpy/scipy fallback.

Times the three hot paths (tridiagonal solve, homogeneous-polynomial cell
evaluation, and the fused implicit Picard step) on desk-scale problems and
prints a side-by-side table.  Run:

    python benchmarks/bench_kernels.py [--cells N] [--repeats R]
"""

import argparse
import time

import numpy as np

from crossdiff import kernels
from crossdiff.entropy import build_coefficients
from crossdiff.params import Params


def _time(func, repeats):
    func()  # warm-up (jit compilation, cache effects)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(cells: int, repeats: int) -> None:
    if kernels.NUMBA_LANE is None:
        print("numba is not installed; only the numpy lane is available")
        return
    rng = np.random.default_rng(0)
    rows = []

    # tridiagonal direct solve
    lower = -rng.uniform(0.1, 1.0, cells)
    upper = -rng.uniform(0.1, 1.0, cells)
    lower[0] = upper[-1] = 0.0
    diag = 1.0 + np.abs(lower) + np.abs(upper)
    rhs = rng.standard_normal(cells)
    rows.append(("thomas solve", cells,
                 _time(lambda: kernels.NUMBA_LANE["thomas"](lower, diag, upper, rhs), repeats),
                 _time(lambda: kernels.NUMPY_LANE["thomas"](lower, diag, upper, rhs), repeats)))

    # polynomial evaluation over cells
    params = Params(2.0, 1.0, 1.0, 1.0)
    coeffs = build_coefficients(params, 6).coeffs
    f = rng.uniform(0.0, 3.0, cells)
    g = rng.uniform(0.0, 3.0, cells)
    rows.append(("entropy cells (n=6)", cells,
                 _time(lambda: kernels.NUMBA_LANE["phi_cells"](coeffs, f, g), repeats),
                 _time(lambda: kernels.NUMPY_LANE["phi_cells"](coeffs, f, g), repeats)))

    # one fused implicit step (plain and regularized)
    x = (np.arange(cells) + 0.5) / cells
    F = 1.0 + 0.5 * np.cos(np.pi * x)
    G = np.ones(cells)
    dx = 1.0 / cells
    for label, reg, eps, rho in (("implicit step", False, 0.0, np.inf),
                                 ("regularized step", True, 1e-3, 1e3)):
        args = (F, G, 2.0, 1.0, 1.0, 1.0, 1e-3, dx, eps, rho, reg, True, 1e-12, 100)
        rows.append((label, cells,
                     _time(lambda: kernels.NUMBA_LANE["picard_1d"](*args), repeats),
                     _time(lambda: kernels.NUMPY_LANE["picard_1d"](*args), repeats)))

    print(f"{'kernel':<22} {'cells':>7} {'numba [ms]':>12} {'numpy [ms]':>12} {'speedup':>9}")
    for name, n, t_nb, t_np in rows:
        print(f"{name:<22} {n:>7} {t_nb * 1e3:>12.4f} {t_np * 1e3:>12.4f} "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--cells", type=int, default=4096)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    bench(args.cells, args.repeats)
