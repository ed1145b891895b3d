"""Benchmark the compiled kernel backend against the NumPy fallback.

Times the hot per-iteration operations (model error/gradient evaluations)
and the one-time sparse Cholesky factorization plus its per-iteration
triangular solve pair. Run as:

    python benchmarks/bench_kernels.py [--sizes 200,500,1000] [--reps 5]
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from embedopt import backend
from embedopt.affinity import AffinityGraph, graph_laplacian, knn_sparsify


def median_time(fn, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def model_cases(n, d, rng):
    X = np.ascontiguousarray(rng.standard_normal((d, n)))
    P = rng.uniform(0.1, 1.0, size=(n, n))
    P = 0.5 * (P + P.T)
    np.fill_diagonal(P, 0.0)
    P = np.ascontiguousarray(P / P.sum())
    Wm = np.ascontiguousarray(np.ones((n, n)) - np.eye(n))
    return [
        ("ee_error", lambda k: k.ee_error(X, P, Wm)),
        ("ee_grad", lambda k: k.ee_grad(X, P, Wm, 100.0)),
        ("gauss_error", lambda k: k.gauss_error(X, P)),
        ("gauss_grad", lambda k: k.gauss_grad(X, P, 1.0)),
        ("student_error", lambda k: k.student_error(X, P)),
        ("student_grad", lambda k: k.student_grad(X, P, 1.0)),
    ]


def sparse_cases(n, d, rng):
    W = rng.uniform(0.1, 1.0, size=(n, n))
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    g = AffinityGraph(W / W.sum(), normalized=True)
    L = graph_laplacian(knn_sparsify(g, 7)).matrix
    A = 4.0 * L + 1e-8 * sp.eye(n, format="csr")
    U = sp.triu(A.tocsc(), k=0, format="csc")
    U.sort_indices()
    args = (n, U.indptr.astype(np.int64), U.indices.astype(np.int64),
            U.data.astype(np.float64))
    py = backend.get_backend("numpy")
    rp, ri, rx = py.sparse_cholesky(*args)
    R = sp.csr_matrix((rx, ri, rp), shape=(n, n))
    Lo = R.T.tocsr()
    Lo.sort_indices()
    largs = (Lo.indptr.astype(np.int64), Lo.indices.astype(np.int64),
             Lo.data.astype(np.float64))
    B = np.ascontiguousarray(rng.standard_normal((n, d)))
    return [
        ("sparse_cholesky(k=7)", lambda k: k.sparse_cholesky(*args)),
        ("tri_solve_pair", lambda k: k.tri_solve_pair(n, *largs, rp, ri, rx, B)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="200,500,1000")
    ap.add_argument("--dims", type=int, default=2)
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if not backend.HAVE_EXT:
        print("compiled extension not available; nothing to compare")
        return

    comp = backend.get_backend("compiled")
    py = backend.get_backend("numpy")
    rng = np.random.default_rng(0)

    header = f"{'kernel':<22} {'N':>6} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        cases = model_cases(n, args.dims, rng) + sparse_cases(n, args.dims, rng)
        for label, call in cases:
            call(py)  # warm both paths
            call(comp)
            t_py = median_time(lambda: call(py), args.reps)
            t_c = median_time(lambda: call(comp), args.reps)
            print(f"{label:<22} {n:>6} {1e3 * t_py:>10.3f} {1e3 * t_c:>12.3f} "
                  f"{t_py / t_c:>8.2f}")


if __name__ == "__main__":
    main()
