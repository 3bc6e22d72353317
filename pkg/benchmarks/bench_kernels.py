"""Time the compiled and numpy backends of the two inner loops.

    python benchmarks/bench_kernels.py [--repeats 5]
"""
import argparse
import time

import numpy as np

from ocpdl import kernels


def _coding_problem(rng, R, b, dim):
    W = rng.uniform(size=(dim, R))
    G = W.T @ W
    P = W.T @ rng.uniform(size=(dim, b))
    return G, P, np.zeros((R, b)), 0.5 / np.trace(G)


def _factor_problem(rng, rows, R):
    M = rng.uniform(size=(4 * R, R))
    A = M.T @ M / (4 * R)
    B = rng.uniform(size=(rows, R))
    return rng.uniform(size=(rows, R)), A, B


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if kernels.BACKEND != "cython":
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':<16}{'size':<16}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for R, b in [(3, 1), (5, 20), (10, 100)]:
        G, P, C0, eta = _coding_problem(rng, R, b, 200)
        run = {be: best_of(lambda: kernels.pgd_code(G, P, C0, 0.1, eta, np.inf, 0.0, 500, backend=be),
                           args.repeats) for be in ("python", None)}
        _report("pgd_code", f"R={R} b={b}", run)
    for rows, R in [(10, 3), (30, 5), (100, 10)]:
        U0, A, B = _factor_problem(rng, rows, R)
        run = {be: best_of(lambda: kernels.cyclic_columns(U0, A, B, 1e6, 0.0, 100, backend=be),
                           args.repeats) for be in ("python", None)}
        _report("cyclic_columns", f"I={rows} R={R}", run)


def _report(name, size, run):
    py, native = run["python"], run[None]
    print(f"{name:<16}{size:<16}{py:>12.5f}{native:>12.5f}{py / native:>10.1f}")


if __name__ == "__main__":
    main()
