"""Timing comparison of the compiled factor kernels against the numpy
fallback, in one process so both backends see identical inputs.

Usage: python benchmarks/bench_kernels.py [--sizes 50,200,500] [--reps 200]
"""

import argparse
import time

import numpy as np

from slamplan import _chol_py

try:
    from slamplan import _chol
except ImportError:
    _chol = None


def make_factor(rng, n):
    a = rng.standard_normal((n, n))
    spd = a @ a.T + n * np.eye(n)
    return np.linalg.cholesky(spd)


def time_call(fn, args_factory, reps):
    best = np.inf
    for _ in range(reps):
        args = args_factory()
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(impl, n, reps, seed=0):
    rng = np.random.default_rng(seed)
    chol = make_factor(rng, n)
    x0 = rng.standard_normal(n)
    b = rng.standard_normal(n)
    out = np.empty(n)

    t_update = time_call(
        impl.chol_update, lambda: (chol.copy(), x0.copy()), reps
    )
    t_solve = time_call(impl.solve_lower, lambda: (chol, b, out), reps)
    return t_update, t_solve


def check_agreement(n, seed=1):
    if _chol is None:
        return
    rng = np.random.default_rng(seed)
    chol = make_factor(rng, n)
    x = rng.standard_normal(n)
    b = rng.standard_normal(n)

    c1, c2 = chol.copy(), chol.copy()
    _chol.chol_update(c1, x.copy())
    _chol_py.chol_update(c2, x.copy())
    assert np.allclose(c1, c2, atol=1e-10), "chol_update backends disagree"

    o1, o2 = np.empty(n), np.empty(n)
    _chol.solve_lower(chol, b, o1)
    _chol_py.solve_lower(chol, b, o2)
    assert np.allclose(o1, o2, atol=1e-10), "solve_lower backends disagree"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="50,200,500")
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    if _chol is None:
        print("compiled extension unavailable; timing fallback only")

    header = f"{'n':>6} {'kernel':<12} {'python_s':>12} {'cython_s':>12} {'ratio':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        check_agreement(n)
        py_update, py_solve = bench_backend(_chol_py, n, args.reps)
        if _chol is not None:
            cy_update, cy_solve = bench_backend(_chol, n, args.reps)
        else:
            cy_update = cy_solve = float("nan")
        for name, tp, tc in (
            ("chol_update", py_update, cy_update),
            ("solve_lower", py_solve, cy_solve),
        ):
            ratio = tp / tc if tc == tc and tc > 0 else float("nan")
            print(f"{n:>6} {name:<12} {tp:>12.3e} {tc:>12.3e} {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
