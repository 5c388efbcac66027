"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 3]

Prints the best wall time per kernel and backend, plus the speedup.
"""

import argparse
import time

import numpy as np

from followsel import kernels
from followsel.graph import random_network


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(n, seed):
    rng = np.random.default_rng(seed)
    net = random_network(n, 8.0, seed=seed)
    A = net.W_off
    diag = net.lap_diag + rng.uniform(0.5, 1.5, n)
    rhs = rng.random(n)
    P = rng.random((n, n))
    col, row = rng.random(n), rng.random(n)
    cands = np.arange(1, n, dtype=np.int64)
    ainv = rng.uniform(0.1, 1.0, n)
    u, w = rng.random(n), rng.random(n)
    return {
        "jacobi_solve": lambda k: k(A.indptr, A.indices, A.data, diag, rhs, np.zeros(n), 1e-10, 100_000),
        "rank1_update": lambda k: k(P, col, row, 1e-9),
        "rank2_update": lambda k: k(P, col, row, row, col, 1e-9, 0.0, 0.0, 1e-9),
        "swap_scores": lambda k: k(P, 0, 0.5, cands, ainv, u, w),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    try:
        kernels.get("jacobi_solve", "cython")
    except ImportError:
        print("compiled extension not built; run `pip install --no-build-isolation -e .`")
        return
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<14} {'cython [s]':>11} {'python [s]':>11} {'speedup':>8}")
    for name, call in cases(args.n, args.seed).items():
        tc = best_of(lambda: call(kernels.get(name, "cython")), args.repeat)
        tp = best_of(lambda: call(kernels.get(name, "python")), args.repeat)
        print(f"{name:<14} {tc:11.4f} {tp:11.4f} {tp / tc:8.2f}")


if __name__ == "__main__":
    main()
