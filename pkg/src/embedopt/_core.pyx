# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot kernels in ``_kernels_py``.

Fused single-pass loops over point pairs for the model errors/gradients
(no N x N temporaries), an up-looking sparse LDL' Cholesky factorization
returning R = D^{1/2} L' in CSR form, and the paired sparse triangular
solves. Semantics match the NumPy backend; see that module for the
reference definitions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p, sqrt

from .errors import DegenerateQ, NotPositiveDefinite

cnp.import_array()

name = "compiled"


def emb_sqdist(double[:, ::1] X):
    """Squared Euclidean distances between the columns of X, shape (N, N)."""
    cdef Py_ssize_t d = X.shape[0], n = X.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, n))
    cdef double[:, ::1] T = out
    cdef Py_ssize_t a, b, i
    cdef double t, diff
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            T[a, b] = t
            T[b, a] = t
    return out


def ee_error(double[:, ::1] X, double[:, ::1] Wp, double[:, ::1] Wm):
    """Attractive and repulsive parts of the elastic-embedding error."""
    cdef Py_ssize_t d = X.shape[0], n = X.shape[1]
    cdef Py_ssize_t a, b, i
    cdef double t, diff, eplus = 0.0, eminus = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            eplus += (Wp[a, b] + Wp[b, a]) * t
            eminus += (Wm[a, b] + Wm[b, a]) * exp(-t)
    return eplus, eminus


def ee_grad(double[:, ::1] X, double[:, ::1] Wp, double[:, ::1] Wm, double lam):
    """Elastic-embedding gradient 4XL, L from w = w+ - lam * w- * exp(-t)."""
    cdef Py_ssize_t d = X.shape[0], n = X.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((d, n))
    cdef double[:, ::1] G = out
    cdef Py_ssize_t a, b, i
    cdef double t, diff, w, c
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            w = Wp[a, b] - lam * Wm[a, b] * exp(-t)
            for i in range(d):
                c = 4.0 * w * (X[i, a] - X[i, b])
                G[i, a] += c
                G[i, b] -= c
    return out


def gauss_error(double[:, ::1] X, double[:, ::1] P):
    """Gaussian-kernel normalized model: returns (sum p*t, kernel sum S)."""
    cdef Py_ssize_t d = X.shape[0], n = X.shape[1]
    cdef Py_ssize_t a, b, i
    cdef double t, diff, eplus = 0.0, S = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            eplus += (P[a, b] + P[b, a]) * t
            S += 2.0 * exp(-t)
    return eplus, S


def gauss_grad(double[:, ::1] X, double[:, ::1] P, double lam):
    """Gradient of the Gaussian normalized model; also returns S."""
    cdef Py_ssize_t d = X.shape[0], n = X.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((d, n))
    cdef double[:, ::1] G = out
    cdef Py_ssize_t a, b, i
    cdef double t, diff, w, c, S = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            S += 2.0 * exp(-t)
    if lam != 0.0 and S == 0.0:
        raise DegenerateQ("kernel normalizer underflowed to zero")
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            w = P[a, b]
            if lam != 0.0:
                w -= lam * exp(-t) / S
            for i in range(d):
                c = 4.0 * w * (X[i, a] - X[i, b])
                G[i, a] += c
                G[i, b] -= c
    return out, S


def student_error(double[:, ::1] X, double[:, ::1] P):
    """Student-t normalized model: returns (sum p*log(1+t), kernel sum S)."""
    cdef Py_ssize_t d = X.shape[0], n = X.shape[1]
    cdef Py_ssize_t a, b, i
    cdef double t, diff, eplus = 0.0, S = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            eplus += (P[a, b] + P[b, a]) * log1p(t)
            S += 2.0 / (1.0 + t)
    return eplus, S


def student_grad(double[:, ::1] X, double[:, ::1] P, double lam):
    """Gradient of the Student-t normalized model; also returns S."""
    cdef Py_ssize_t d = X.shape[0], n = X.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((d, n))
    cdef double[:, ::1] G = out
    cdef Py_ssize_t a, b, i
    cdef double t, diff, k, w, c, S = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            S += 2.0 / (1.0 + t)
    for a in range(n):
        for b in range(a + 1, n):
            t = 0.0
            for i in range(d):
                diff = X[i, a] - X[i, b]
                t += diff * diff
            k = 1.0 / (1.0 + t)
            if lam != 0.0:
                w = (P[a, b] - lam * k / S) * k
            else:
                w = P[a, b] * k
            for i in range(d):
                c = 4.0 * w * (X[i, a] - X[i, b])
                G[i, a] += c
                G[i, b] -= c
    return out, S


def sparse_cholesky(Py_ssize_t n, long long[::1] Ap, long long[::1] Ai,
                    double[::1] Ax):
    """Cholesky factor R (upper, R'R = A) of a sparse SPD matrix.

    A is given as CSC arrays of its upper triangle including the diagonal,
    with sorted row indices. Up-looking LDL' with the elimination-tree
    reach per column; R = D^{1/2} L' comes out in CSR with sorted column
    indices. Raises NotPositiveDefinite on a nonpositive pivot.
    """
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parent = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] flag = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] Lnz = np.zeros(n, dtype=np.int64)
    cdef long long[::1] parent_v = parent, flag_v = flag, lnz_v = Lnz
    cdef Py_ssize_t k, p, i
    # symbolic pass: per-column counts of L via etree walks
    for k in range(n):
        parent_v[k] = -1
        flag_v[k] = k
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            while i < k and flag_v[i] != k:
                if parent_v[i] == -1:
                    parent_v[i] = k
                lnz_v[i] += 1
                flag_v[i] = k
                i = parent_v[i]

    cdef cnp.ndarray[cnp.int64_t, ndim=1] Lp = np.zeros(n + 1, dtype=np.int64)
    cdef long long[::1] lp_v = Lp
    for k in range(n):
        lp_v[k + 1] = lp_v[k] + lnz_v[k]
    cdef Py_ssize_t lnz_total = lp_v[n]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] Li = np.empty(lnz_total, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Lx = np.empty(lnz_total)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] D = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Y = np.zeros(n)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pattern = np.empty(n, dtype=np.int64)
    cdef long long[::1] li_v = Li, pat_v = pattern
    cdef double[::1] lx_v = Lx, d_v = D, y_v = Y
    cdef Py_ssize_t top, length, s, p2
    cdef double yi, l_ki

    # numeric pass (up-looking: row k of L via sparse solve on the pattern)
    for k in range(n):
        lnz_v[k] = 0
    for k in range(n):
        top = n
        flag_v[k] = k
        y_v[k] = 0.0
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i > k:
                raise ValueError("input must be the upper triangle in CSC")
            y_v[i] += Ax[p]
            length = 0
            while flag_v[i] != k:
                pat_v[length] = i
                length += 1
                flag_v[i] = k
                i = parent_v[i]
            while length > 0:
                length -= 1
                top -= 1
                pat_v[top] = pat_v[length]
        d_v[k] = y_v[k]
        y_v[k] = 0.0
        for s in range(top, n):
            i = pat_v[s]
            yi = y_v[i]
            y_v[i] = 0.0
            p2 = lp_v[i] + lnz_v[i]
            for p in range(lp_v[i], p2):
                y_v[li_v[p]] -= lx_v[p] * yi
            l_ki = yi / d_v[i]
            d_v[k] -= l_ki * yi
            li_v[p2] = k
            lx_v[p2] = l_ki
            lnz_v[i] += 1
        if d_v[k] <= 0.0:
            raise NotPositiveDefinite(
                f"nonpositive pivot {d_v[k]!r} at column {k}"
            )

    # R = D^{1/2} L': row i of R = sqrt(D_i) * (1 at col i, then column i of L)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] Rp = np.empty(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] Ri = np.empty(lnz_total + n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Rx = np.empty(lnz_total + n)
    cdef long long[::1] rp_v = Rp, ri_v = Ri
    cdef double[::1] rx_v = Rx
    cdef double root
    cdef Py_ssize_t q = 0
    for i in range(n):
        rp_v[i] = q
        root = sqrt(d_v[i])
        ri_v[q] = i
        rx_v[q] = root
        q += 1
        for p in range(lp_v[i], lp_v[i + 1]):
            ri_v[q] = li_v[p]  # rows of column i of L appear in increasing order
            rx_v[q] = root * lx_v[p]
            q += 1
    rp_v[n] = q
    return Rp, Ri, Rx


def tri_solve_pair(Py_ssize_t n, long long[::1] Lp, long long[::1] Li,
                   double[::1] Lx, long long[::1] Rp, long long[::1] Ri,
                   double[::1] Rx, double[:, ::1] B):
    """Solve R'R X = B given R (CSR upper) and L = R' (CSR lower); B is (n, k).

    Row indices must be sorted, so L rows end at the diagonal and R rows
    start at it.
    """
    cdef Py_ssize_t k = B.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.array(B, copy=True)
    cdef double[:, ::1] Xv = out
    cdef Py_ssize_t row, p, j
    cdef double diag
    # forward solve L Y = B (diagonal entry last in each row)
    for row in range(n):
        diag = Lx[Lp[row + 1] - 1]
        for p in range(Lp[row], Lp[row + 1] - 1):
            for j in range(k):
                Xv[row, j] -= Lx[p] * Xv[Li[p], j]
        for j in range(k):
            Xv[row, j] /= diag
    # backward solve R X = Y (diagonal entry first in each row)
    for row in range(n - 1, -1, -1):
        diag = Rx[Rp[row]]
        for p in range(Rp[row] + 1, Rp[row + 1]):
            for j in range(k):
                Xv[row, j] -= Rx[p] * Xv[Ri[p], j]
        for j in range(k):
            Xv[row, j] /= diag
    return out
