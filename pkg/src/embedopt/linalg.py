"""Symmetric linear algebra for the descent strategies.

Provides damped Cholesky factorization (dense via LAPACK, sparse via the
kernel backend with a minimum-degree fill-reducing ordering), the paired
triangular solves that turn a cached factor into a search direction, and a
matrix-free linear conjugate-gradient solver.

Right-hand sides of length N*d are always handled as d independent
length-N systems, one per embedding coordinate: the factored matrix is an
N x N operator acting identically on every coordinate.
"""

import heapq

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import backend
from .errors import BreakdownNonPSD, DimensionMismatch, NotPositiveDefinite

# sparse machinery costs more than it saves on dense-ish problems
DENSE_FALLBACK_DENSITY = 0.25


class CholeskyFactor:
    """Upper-triangular factor R with R'R = B + damping*I.

    Dense factors store ``r`` (an upper-triangular ndarray). Sparse factors
    store CSR arrays of R and of L = R' plus the fill-reducing permutation
    ``perm`` under which the damped matrix was factorized.
    """

    def __init__(self, order, damping, r=None, perm=None, sparse_csr=None):
        self.order = order
        self.damping = damping
        self.r = r
        self.perm = perm
        if sparse_csr is not None:
            self.rp, self.ri, self.rx = sparse_csr
            L = sp.csr_matrix((self.rx, self.ri, self.rp), (order, order)).T.tocsr()
            L.sort_indices()
            self.lp = L.indptr.astype(np.int64)
            self.li = L.indices.astype(np.int64)
            self.lx = L.data.astype(np.float64)
        else:
            self.rp = self.ri = self.rx = None
            self.lp = self.li = self.lx = None

    @property
    def is_sparse(self):
        return self.r is None

    def r_matrix(self):
        """The factor R as a matrix (ndarray or CSR), mainly for tests."""
        if self.is_sparse:
            return sp.csr_matrix((self.rx, self.ri, self.rp), (self.order, self.order))
        return self.r


def _check_symmetric_finite(B):
    if B.shape[0] != B.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {B.shape}")
    if sp.issparse(B):
        if (B != B.T).nnz != 0:
            raise ValueError("matrix must be symmetric")
        if not np.all(np.isfinite(B.data)):
            raise ValueError("matrix entries must be finite")
    else:
        if not np.array_equal(B, B.T):
            raise ValueError("matrix must be symmetric")
        if not np.all(np.isfinite(B)):
            raise ValueError("matrix entries must be finite")


def min_degree_order(pattern):
    """Greedy minimum-degree elimination order for a symmetric sparsity pattern.

    Ties break toward the smallest vertex index, so the order is
    deterministic. Quadratic-ish worst case; intended for the desk-scale
    graphs this package factorizes once per run.
    """
    P = sp.csr_matrix(pattern)
    n = P.shape[0]
    adj = [set(P.indices[P.indptr[i]:P.indptr[i + 1]]) - {i} for i in range(n)]
    heap = [(len(adj[i]), i) for i in range(n)]
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    order = []
    while heap:
        deg, v = heapq.heappop(heap)
        if done[v] or deg != len(adj[v]):
            continue  # stale heap entry
        done[v] = True
        order.append(v)
        nbrs = [u for u in adj[v] if not done[u]]
        for u in nbrs:
            adj[u].discard(v)
        for a, u in enumerate(nbrs):
            new = adj[u]
            for w in nbrs[a + 1:]:
                if w not in new:
                    new.add(w)
                    adj[w].add(u)
            heapq.heappush(heap, (len(new), u))
    return np.asarray(order, dtype=np.int64)


def cholesky_factorize(B, mu=0.0):
    """Factor B + mu*I as R'R with R upper triangular.

    B may be a dense ndarray or a scipy sparse matrix; sparse inputs denser
    than DENSE_FALLBACK_DENSITY are factorized densely. Sparse inputs are
    permuted by a minimum-degree ordering (recorded in the factor) before
    the numeric factorization, which runs on the active kernel backend.

    Raises NotPositiveDefinite when a pivot comes out nonpositive, meaning
    mu is too small or B is not positive semidefinite.
    """
    if mu < 0.0:
        raise ValueError("damping must be nonnegative")
    _check_symmetric_finite(B)
    n = B.shape[0]
    if sp.issparse(B) and B.nnz <= DENSE_FALLBACK_DENSITY * n * n:
        perm = min_degree_order(B)
        A = (B.tocsr() + mu * sp.eye(n, format="csr"))[perm, :][:, perm]
        U = sp.triu(A, k=0, format="csc")
        U.sort_indices()
        rp, ri, rx = backend.active.sparse_cholesky(
            n,
            U.indptr.astype(np.int64),
            U.indices.astype(np.int64),
            U.data.astype(np.float64),
        )
        return CholeskyFactor(n, mu, perm=perm, sparse_csr=(rp, ri, rx))
    A = B.toarray() if sp.issparse(B) else np.array(B, dtype=np.float64)
    A[np.diag_indices(n)] += mu
    try:
        R = scipy.linalg.cholesky(A, lower=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return CholeskyFactor(n, mu, r=R)


def solve_via_factor(factor, g):
    """Return p solving (B + mu*I) p = -g through the cached factor.

    g is either a length-N vector or a (d, N) array of d stacked
    right-hand sides (the gradient layout); the result has the same shape.
    """
    g = np.asarray(g, dtype=np.float64)
    vec = g.ndim == 1
    if vec:
        g = g[None, :]
    if g.ndim != 2 or g.shape[1] != factor.order:
        raise DimensionMismatch(
            f"rhs has shape {g.shape}, factor order is {factor.order}"
        )
    rhs = -g.T.copy()  # (N, d)
    if factor.is_sparse:
        rhs = rhs[factor.perm]
        z = backend.active.tri_solve_pair(
            factor.order,
            factor.lp, factor.li, factor.lx,
            factor.rp, factor.ri, factor.rx,
            rhs,
        )
        out = np.empty_like(z)
        out[factor.perm] = z
    else:
        y = scipy.linalg.solve_triangular(factor.r, rhs, trans="T", lower=False)
        out = scipy.linalg.solve_triangular(factor.r, y, lower=False)
    p = out.T
    return p[0] if vec else p


def linear_cg(apply_B, b, x0=None, rel_tol=1e-6, max_iter=1000):
    """Conjugate gradients on a symmetric psd operator given as a callable.

    Stops when ||B x - b|| <= rel_tol * ||b|| or after max_iter iterations,
    whichever comes first; returns (x, iterations used). b and x may have
    any shape (inner products run over all entries), so a (d, N) block
    system solves in one call.

    Raises BreakdownNonPSD on a direction of nonpositive curvature, which
    signals a non-psd operator; callers fall back to steepest descent.
    """
    if rel_tol <= 0.0:
        raise ValueError("rel_tol must be positive")
    b = np.asarray(b, dtype=np.float64)
    b_norm = np.linalg.norm(b.ravel())
    if b_norm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - apply_B(x)
    if np.linalg.norm(r.ravel()) <= rel_tol * b_norm:
        return x, 0
    p = r.copy()
    rs = float(np.vdot(r, r))
    for it in range(1, max_iter + 1):
        Bp = apply_B(p)
        curv = float(np.vdot(p, Bp))
        if curv <= 0.0:
            raise BreakdownNonPSD(f"curvature {curv:.3e} at iteration {it}")
        alpha = rs / curv
        x += alpha * p
        r -= alpha * Bp
        rs_new = float(np.vdot(r, r))
        if np.sqrt(rs_new) <= rel_tol * b_norm:
            return x, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, max_iter
