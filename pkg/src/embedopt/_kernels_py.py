"""NumPy implementations of the hot kernels.

This module is the reference backend: every function here has a compiled
twin in ``embedopt._core`` with the same name and signature, and the
compiled build is tested entry-by-entry against these. Conventions:

* embeddings are ``(d, N)`` float64 arrays, column n = point n;
* pair sums run over ordered pairs n != m (weight matrices have zero
  diagonals, so the diagonal never contributes);
* sparse factors use CSR/CSC index arrays in int64.
"""

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .errors import DegenerateQ, NotPositiveDefinite

name = "numpy"


def emb_sqdist(X):
    """Squared Euclidean distances between the columns of X, shape (N, N)."""
    sq = np.einsum("ij,ij->j", X, X)
    T = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
    np.maximum(T, 0.0, out=T)  # clamp rounding noise
    np.fill_diagonal(T, 0.0)
    return T


def _lap_grad(X, W):
    # G = 4 X (D - W) with D = diag(row sums of W)
    deg = W.sum(axis=1)
    return 4.0 * (X * deg[None, :] - X @ W)


def ee_error(X, Wp, Wm):
    """Attractive and repulsive parts of the elastic-embedding error."""
    T = emb_sqdist(X)
    eplus = float(np.sum(Wp * T))
    eminus = float(np.sum(Wm * np.exp(-T))) - float(np.trace(Wm))
    return eplus, eminus


def ee_grad(X, Wp, Wm, lam):
    """Elastic-embedding gradient 4XL, L from w = w+ - lam * w- * exp(-t)."""
    T = emb_sqdist(X)
    W = Wp - lam * (Wm * np.exp(-T))
    np.fill_diagonal(W, 0.0)
    return _lap_grad(X, W)


def gauss_error(X, P):
    """Gaussian-kernel normalized model: returns (sum p*t, kernel sum S)."""
    T = emb_sqdist(X)
    eplus = float(np.sum(P * T))
    K = np.exp(-T)
    np.fill_diagonal(K, 0.0)
    return eplus, float(K.sum())


def gauss_grad(X, P, lam):
    """Gradient of the Gaussian normalized model; also returns S."""
    T = emb_sqdist(X)
    K = np.exp(-T)
    np.fill_diagonal(K, 0.0)
    S = float(K.sum())
    if lam != 0.0:
        if S == 0.0:
            raise DegenerateQ("kernel normalizer underflowed to zero")
        W = P - (lam / S) * K
    else:
        W = P
    return _lap_grad(X, W), S


def student_error(X, P):
    """Student-t normalized model: returns (sum p*log(1+t), kernel sum S)."""
    T = emb_sqdist(X)
    eplus = float(np.sum(P * np.log1p(T)))
    K = 1.0 / (1.0 + T)
    np.fill_diagonal(K, 0.0)
    return eplus, float(K.sum())


def student_grad(X, P, lam):
    """Gradient of the Student-t normalized model; also returns S."""
    T = emb_sqdist(X)
    K = 1.0 / (1.0 + T)
    np.fill_diagonal(K, 0.0)
    S = float(K.sum())
    if lam != 0.0:
        W = (P - (lam / S) * K) * K
    else:
        W = P * K
    return _lap_grad(X, W), S


def sparse_cholesky(n, Ap, Ai, Ax):
    """Cholesky factor R (upper, R'R = A) of a sparse SPD matrix.

    A is given as CSC arrays of its upper triangle including the diagonal.
    The fallback densifies, factorizes with LAPACK and re-sparsifies;
    structural zeros of the factor are exact zeros in the dense algorithm,
    so the sparsity pattern survives. Returns CSR arrays (Rp, Ri, Rx).
    """
    U = sp.csc_matrix((Ax, Ai, Ap), shape=(n, n))
    A = (U + sp.triu(U, k=1).T).toarray()
    try:
        R = scipy.linalg.cholesky(A, lower=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    Rs = sp.csr_matrix(R)
    Rs.sort_indices()
    return (
        Rs.indptr.astype(np.int64),
        Rs.indices.astype(np.int64),
        Rs.data.astype(np.float64),
    )


def tri_solve_pair(n, Lp, Li, Lx, Rp, Ri, Rx, B):
    """Solve R'R X = B given R (CSR upper) and L = R' (CSR lower); B is (n, k)."""
    L = sp.csr_matrix((Lx, Li, Lp), shape=(n, n))
    R = sp.csr_matrix((Rx, Ri, Rp), shape=(n, n))
    Y = spsolve_triangular(L, B, lower=True)
    return spsolve_triangular(R, Y, lower=False)
