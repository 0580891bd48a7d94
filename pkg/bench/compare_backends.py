"""Benchmark the numba kernels against the pure-numpy reference.

Usage: python3 bench/compare_backends.py [--elements T] [--block m] [--reps N]

Times the hot kernels (block matvec, plain and stage-coupled ILU(0)
factor/solve) on a periodic line mesh and reports per-call times plus
the speedup.  The first numba call includes JIT compilation and is
excluded from timing.
"""

import argparse
import time

import numpy as np

from irksolve import (BlockSparseMatrix, build_line_mesh, builtin_tableau,
                      derive, make_viscous_burgers_mms, Dg1dConfig,
                      StageOperator, stage_coupled_factorize, ilu0_factorize)
from irksolve.kernels import set_backend


def make_problem(T, m):
    graph = build_line_mesh(T, periodic=True)
    rng = np.random.default_rng(0)
    mat = BlockSparseMatrix(graph, m)
    for i in range(T):
        mat.set_block(i, i, 4.0 * np.eye(m) + 0.1 * rng.standard_normal((m, m)))
        for j in graph.adjacency[i]:
            mat.set_block(i, j, 0.3 * rng.standard_normal((m, m)))
    return mat, rng.standard_normal(T * m)


def time_call(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--elements", type=int, default=256)
    ap.add_argument("--block", type=int, default=6)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()

    mat, x = make_problem(args.elements, args.block)
    tab = builtin_tableau("RADAU35")
    der = derive(tab)
    cfg = Dg1dConfig(poly_degree=args.block - 1, elements=args.elements,
                     diffusion=0.01)
    prob = make_viscous_burgers_mms(cfg)
    mass = prob.mass()
    u = prob.initial_state()
    jacs = [prob.jacobian(0.0, u) for _ in range(tab.s)]
    op = StageOperator(der, 0.02, mass, jacs)
    w = np.random.default_rng(1).standard_normal(op.total_dim)

    results = {}
    for backend in ("numpy", "numba"):
        set_backend(backend)
        # warm-up triggers JIT compilation for numba
        mat.matvec(x)
        fac = ilu0_factorize(mat.copy())
        fac.apply(x)
        cfac = stage_coupled_factorize(op)
        cfac.apply(w)

        results[backend] = {
            "matvec": time_call(lambda: mat.matvec(x), args.reps),
            "ilu0-factorize": time_call(lambda: ilu0_factorize(mat.copy()), args.reps),
            "ilu0-apply": time_call(lambda: fac.apply(x), args.reps),
            "coupled-factorize": time_call(lambda: stage_coupled_factorize(op), args.reps),
            "coupled-apply": time_call(lambda: cfac.apply(w), args.reps),
        }

    print(f"T={args.elements} m={args.block} (best of {args.reps})")
    print(f"{'kernel':20s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>9s}")
    for key in results["numpy"]:
        tn = results["numpy"][key] * 1e3
        tb = results["numba"][key] * 1e3
        print(f"{key:20s} {tn:12.4f} {tb:12.4f} {tn / tb:8.2f}x")


if __name__ == "__main__":
    main()
