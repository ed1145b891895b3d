"""Data-side inputs: distances, SNE affinities, kNN graphs, Laplacians.

Data matrices are (D, N) arrays, one column per point, matching the
(d, N) embedding convention. Affinity matrices are symmetric, nonnegative
and zero on the diagonal; "normalized" graphs sum to 1 over all ordered
pairs and play the role of the probability matrix P of the normalized
models.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels_py
from .errors import CalibrationFailed

NORMALIZED_TOL = 1e-10


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric nonnegative pairwise weights with a zero diagonal."""

    weights: object  # (N, N) ndarray or scipy sparse matrix
    normalized: bool = False

    def __post_init__(self):
        W = self.weights
        if W.shape[0] != W.shape[1]:
            raise ValueError(f"weights must be square, got {W.shape}")
        if sp.issparse(W):
            if (abs(W - W.T)).max() > 0:
                raise ValueError("weights must be symmetric")
            if W.diagonal().any():
                raise ValueError("weights must have a zero diagonal")
            if W.nnz and W.min() < 0:
                raise ValueError("weights must be nonnegative")
            total = W.sum()
        else:
            if not np.array_equal(W, W.T):
                raise ValueError("weights must be symmetric")
            if np.any(np.diagonal(W) != 0):
                raise ValueError("weights must have a zero diagonal")
            if np.any(W < 0):
                raise ValueError("weights must be nonnegative")
            total = float(W.sum())
        if self.normalized and abs(total - 1.0) > NORMALIZED_TOL:
            raise ValueError(f"normalized graph sums to {total!r}, not 1")

    @property
    def order(self):
        return self.weights.shape[0]

    def dense_weights(self):
        W = self.weights
        return W.toarray() if sp.issparse(W) else np.asarray(W, dtype=np.float64)


@dataclass(frozen=True)
class GraphLaplacian:
    """L = D - W with D = diag(row sums); psd whenever W is nonnegative."""

    matrix: object  # (N, N) ndarray or scipy sparse matrix
    degrees: np.ndarray = field(repr=False)

    @property
    def order(self):
        return self.matrix.shape[0]


def pairwise_sqdist(Y):
    """Squared Euclidean distance matrix between the columns of Y.

    Computed with the Gram-matrix identity (BLAS-friendly for large D);
    tiny negative rounding is clamped to zero and the diagonal is exact.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if not np.all(np.isfinite(Y)):
        raise ValueError("data must be finite")
    return _kernels_py.emb_sqdist(Y)


def _entropy_bits(p):
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log2(nz)))


def _conditionals_at(d, sigma2):
    # exp is shifted by the row minimum so small bandwidths stay finite
    z = np.exp((d.min() - d) / (2.0 * sigma2))
    return z / z.sum()


def calibrate_perplexity(sqdist_row, perplexity, self_index=None,
                         max_expand=1000, bisect_steps=64):
    """Per-point Gaussian bandwidth matching a perplexity target.

    Finds sigma^2 such that the conditional distribution
    p_m ~ exp(-d_m / (2 sigma^2)) over the other points has perplexity
    2^H equal to ``perplexity`` within 1e-4 relative, by expanding a
    bracket from the mean distance (entropy grows with sigma^2) and then
    bisecting. Returns (sigma2, conditionals) where conditionals is the
    full-length row with a zero at ``self_index``.

    An all-zero distance row yields the uniform distribution (duplicated
    points must not abort ingestion). Raises CalibrationFailed when no
    bracket exists, e.g. equal distances with an infeasible target.
    """
    row = np.asarray(sqdist_row, dtype=np.float64)
    n = row.shape[0]
    mask = np.ones(n, dtype=bool)
    if self_index is not None:
        mask[self_index] = False
    d = row[mask]
    if d.size < 2:
        raise ValueError("need at least 2 off-diagonal entries")
    if not perplexity > 1.0:
        raise ValueError("perplexity must exceed 1")

    out = np.zeros(n)
    if d.max() == 0.0:
        out[mask] = 1.0 / d.size
        return 1.0, out

    target = np.log2(perplexity)

    def entropy(s2):
        return _entropy_bits(_conditionals_at(d, s2))

    s = float(d.mean())
    h = entropy(s)
    if abs(2.0 ** h - perplexity) <= 1e-4 * perplexity:
        out[mask] = _conditionals_at(d, s)
        return s, out

    lo = hi = s
    if h < target:  # need more spread
        for _ in range(max_expand):
            hi *= 2.0
            if entropy(hi) >= target:
                break
            lo = hi
        else:
            raise CalibrationFailed(
                f"cannot reach perplexity {perplexity} (entropy ceiling "
                f"{entropy(hi):.6f} bits)"
            )
    else:
        for _ in range(max_expand):
            lo /= 2.0
            if entropy(lo) <= target:
                break
            hi = lo
        else:
            raise CalibrationFailed(
                f"cannot reach perplexity {perplexity} from below"
            )

    for _ in range(bisect_steps):
        mid = 0.5 * (lo + hi)
        if entropy(mid) < target:
            lo = mid
        else:
            hi = mid
    s2 = 0.5 * (lo + hi)
    p = _conditionals_at(d, s2)
    if abs(2.0 ** _entropy_bits(p) - perplexity) > 1e-4 * perplexity:
        raise CalibrationFailed(
            f"bisection did not reach perplexity {perplexity}"
        )
    out[mask] = p
    return s2, out


def symmetrize_affinities(conditionals):
    """Normalized symmetric affinities from per-point conditionals.

    p_nm = (p_{m|n} + p_{n|m}) / 2N, which makes the entries sum to 1 over
    all ordered pairs, matching the normalization of the q distribution.
    """
    C = np.asarray(conditionals, dtype=np.float64)
    n = C.shape[0]
    if C.shape != (n, n):
        raise ValueError("conditionals must be a square row stack")
    if np.any(np.diagonal(C) != 0):
        raise ValueError("conditionals must have zero self-probability")
    P = (C + C.T) / (2.0 * n)
    return AffinityGraph(P, normalized=True)


def sne_affinities(Y, perplexity, sqdist=None):
    """Perplexity-calibrated, symmetrized SNE affinities for a data matrix.

    Pass ``sqdist`` to reuse a precomputed distance matrix.
    """
    D2 = pairwise_sqdist(Y) if sqdist is None else np.asarray(sqdist, float)
    n = D2.shape[0]
    C = np.zeros((n, n))
    for i in range(n):
        _, C[i] = calibrate_perplexity(D2[i], perplexity, self_index=i)
    return symmetrize_affinities(C)


def knn_sparsify(graph, kappa):
    """Keep each point's kappa largest-weight neighbors, symmetrized by union.

    kappa = N returns the graph unchanged; kappa = 0 returns the empty
    graph. Kept entries preserve their original values (weights are only
    zeroed, never invented), and ties order by neighbor index so the
    selection is deterministic. The sparsified result is stored sparse.
    """
    n = graph.order
    if not 0 <= kappa <= n:
        raise ValueError(f"kappa must be in [0, {n}], got {kappa}")
    if kappa >= n:
        return graph
    if kappa == 0:
        return AffinityGraph(np.zeros((n, n)), normalized=False)
    W = graph.dense_weights()
    keep = np.zeros((n, n), dtype=bool)
    for i in range(n):
        others = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        ranked = others[np.argsort(-W[i, others], kind="stable")]
        keep[i, ranked[:kappa]] = True
    keep |= keep.T
    return AffinityGraph(sp.csr_matrix(np.where(keep, W, 0.0)), normalized=False)


def graph_laplacian(graph_or_weights):
    """Graph Laplacian L = D - W of an affinity graph or raw weight matrix.

    Raw signed matrices are accepted (the gradient Laplacian has mixed
    signs); the psd guarantee only holds for nonnegative weights.
    """
    W = graph_or_weights
    if isinstance(W, AffinityGraph):
        W = W.weights
    if sp.issparse(W):
        W = W.tocsr()
        deg = np.asarray(W.sum(axis=1)).ravel()
        L = sp.diags(deg, format="csr") - W
        return GraphLaplacian(L.tocsr(), deg)
    W = np.asarray(W, dtype=np.float64)
    deg = W.sum(axis=1)
    L = np.diag(deg) - W
    return GraphLaplacian(L, deg)
