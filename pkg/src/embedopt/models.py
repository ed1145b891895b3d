"""Embedding objectives in attraction-repulsion form.

The error of every model is E(X) = E+(X) + lam * E-(X) over an embedding
X of shape (d, N). Three models are provided:

* ``ee``   - elastic embedding, unnormalized Gaussian repulsion;
* ``ssne`` - symmetric SNE, Gaussian kernel, pair-normalized q;
* ``tsne`` - symmetric SNE with a Student-t kernel.

Gradients are computed in graph-Laplacian form, G = 4 X L(W), with the
model-specific signed weights W; this exposes the attractive Laplacian
L+ whose (constant) curvature drives the spectral direction. The full
Hessian is assembled densely only as a small-N reference.

The Nd-vector convention throughout is point-major: the d coordinates of
point 1, then point 2, and so on (vec(X) = X.ravel(order="F")).
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import backend
from .affinity import AffinityGraph, GraphLaplacian, graph_laplacian
from .errors import DegenerateQ, OracleScaleExceeded

ORACLE_N_CAP = 200


@dataclass(frozen=True)
class Kernel:
    """Decreasing positive kernel K(t) on squared distances t >= 0.

    Besides K itself, the log-derivative functions used by the weight
    formulas are exposed: K1 = (log K)', K2 = K''/K and K21 = K2 - K1^2.
    """

    kind: str

    def k(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.exp(-t) if self.kind == "gaussian" else 1.0 / (1.0 + t)

    def k1(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "gaussian":
            return np.full_like(t, -1.0)
        return -1.0 / (1.0 + t)

    def k2(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "gaussian":
            return np.full_like(t, 1.0)
        return 2.0 / (1.0 + t) ** 2

    def k21(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "gaussian":
            return np.zeros_like(t)
        return 1.0 / (1.0 + t) ** 2


GAUSSIAN = Kernel("gaussian")
STUDENT_T = Kernel("student_t")


def kernel_eval(kernel, t):
    """Evaluate (K, K1, K2, K21) at squared distance t."""
    return kernel.k(t), kernel.k1(t), kernel.k2(t), kernel.k21(t)


@dataclass(frozen=True)
class EmbeddingModel:
    """One embedding objective: model kind, repulsion weight lam, affinities.

    ``wplus`` holds P for the normalized models and the attraction weights
    for EE; ``wminus`` (EE only) holds the repulsion weights. ``dim`` is
    the embedding dimension d.
    """

    kind: str
    lam: float
    wplus: AffinityGraph
    wminus: AffinityGraph = None
    dim: int = 2

    def __post_init__(self):
        if self.kind not in ("ee", "ssne", "tsne"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.kind in ("ssne", "tsne") and not self.wplus.normalized:
            raise ValueError(f"{self.kind} requires normalized affinities")
        if self.kind == "ee" and self.wminus is None:
            raise ValueError("ee requires repulsion weights (wminus)")
        if self.wminus is not None and self.wminus.order != self.wplus.order:
            raise ValueError("wplus and wminus orders differ")
        if self.dim < 1:
            raise ValueError("dim must be positive")

    @property
    def order(self):
        return self.wplus.order

    @property
    def normalized(self):
        return self.kind in ("ssne", "tsne")

    @property
    def kernel(self):
        return STUDENT_T if self.kind == "tsne" else GAUSSIAN

    @cached_property
    def _wp(self):
        return np.ascontiguousarray(self.wplus.dense_weights())

    @cached_property
    def _wm(self):
        if self.wminus is None:
            return None
        return np.ascontiguousarray(self.wminus.dense_weights())


def complete_graph(n):
    """All-ones off-diagonal weights: the default EE repulsion graph."""
    W = np.ones((n, n)) - np.eye(n)
    return AffinityGraph(W, normalized=False)


def make_model(kind, wplus, lam=None, wminus=None, dim=2):
    """Build an EmbeddingModel with the conventional defaults.

    lam defaults to 100 for EE and 1 for the normalized models; EE's
    repulsion graph defaults to the complete graph.
    """
    if lam is None:
        lam = 100.0 if kind == "ee" else 1.0
    if kind == "ee" and wminus is None:
        wminus = complete_graph(wplus.order)
    return EmbeddingModel(kind, float(lam), wplus, wminus, dim)


@dataclass(frozen=True)
class ModelWeights:
    """Materialized weight matrices at a given X (see model_weights)."""

    W: np.ndarray
    Q: np.ndarray = None
    Wq: np.ndarray = None
    xx_diag: np.ndarray = None  # (d, N, N) same-dimension Hessian block weights


def _as_embedding(X, model):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.order:
        raise ValueError(
            f"embedding must be (d, {model.order}), got {X.shape}"
        )
    return X


def compute_q(X, model_or_kernel):
    """Pair-normalized kernel matrix q_nm over the embedding.

    Raises DegenerateQ when the kernel sum underflows to zero (Gaussian
    kernel with all points extremely far apart).
    """
    kernel = getattr(model_or_kernel, "kernel", model_or_kernel)
    X = np.ascontiguousarray(X, dtype=np.float64)
    K = kernel.k(backend.get_backend("numpy").emb_sqdist(X))
    np.fill_diagonal(K, 0.0)
    S = K.sum()
    if S == 0.0:
        raise DegenerateQ("kernel normalizer underflowed to zero")
    return K / S


def _xx_coefficients(model, T, Q):
    """Coefficient c_nm with w^xx_{in,jm} = c_nm (x_in - x_im)(x_jn - x_jm)."""
    if model.kind == "ee":
        return model.lam * model._wm * np.exp(-T)
    kern = model.kernel
    C = -(kern.k21(T) * model._wp - model.lam * kern.k2(T) * Q)
    np.fill_diagonal(C, 0.0)
    return C


def model_weights(X, model, with_xx=False):
    """Weight matrices of the Laplacian-form gradient and Hessian at X.

    Always returns the signed gradient weights W. For normalized models it
    adds the q matrix and the rank-one-term weights Wq = K1 * q. With
    ``with_xx`` it also materializes the d same-dimension slices of the
    Hessian block weights (used by the Hessian reference and the
    block-augmented spectral direction); these are the only xx slices ever
    stored.
    """
    X = _as_embedding(X, model)
    T = backend.get_backend("numpy").emb_sqdist(X)
    if model.kind == "ee":
        W = model._wp - model.lam * (model._wm * np.exp(-T))
        np.fill_diagonal(W, 0.0)
        Q = Wq = None
    else:
        Q = compute_q(X, model)
        k1 = model.kernel.k1(T)
        W = -k1 * (model._wp - model.lam * Q)
        Wq = k1 * Q
        np.fill_diagonal(W, 0.0)
        np.fill_diagonal(Wq, 0.0)
    xx = None
    if with_xx:
        C = _xx_coefficients(model, T, Q)
        d = X.shape[0]
        n = model.order
        xx = np.empty((d, n, n))
        for i in range(d):
            diff = X[i][:, None] - X[i][None, :]
            xx[i] = C * diff * diff
    return ModelWeights(W=W, Q=Q, Wq=Wq, xx_diag=xx)


def eval_error(X, model):
    """Objective value E(X) = E+(X) + lam * E-(X)."""
    X = _as_embedding(X, model)
    k = backend.active
    if model.kind == "ee":
        eplus, eminus = k.ee_error(X, model._wp, model._wm)
        return eplus + model.lam * eminus
    fn = k.gauss_error if model.kind == "ssne" else k.student_error
    eplus, S = fn(X, model._wp)
    if model.lam == 0.0:
        return eplus
    if S == 0.0:
        raise DegenerateQ("kernel normalizer underflowed to zero")
    return eplus + model.lam * float(np.log(S))


def eval_gradient(X, model):
    """Gradient of E at X in Laplacian form, shape (d, N)."""
    X = _as_embedding(X, model)
    k = backend.active
    if model.kind == "ee":
        return k.ee_grad(X, model._wp, model._wm, model.lam)
    fn = k.gauss_grad if model.kind == "ssne" else k.student_grad
    G, _ = fn(X, model._wp, model.lam)
    return G


def attractive_laplacian(model):
    """Laplacian L+ of the attraction weights; the spectral curvature.

    For the Gaussian-kernel models this is the exact (constant) Hessian
    factor of E+; for the Student-t model it is the curvature at X = 0,
    held fixed. In all three cases the weights are just wplus, so the
    result is psd.
    """
    return graph_laplacian(model.wplus)


def hessian_diagonal(X, model):
    """Exact diagonal of the full Hessian, as a (d, N) array.

    Entry (i, n) is the second derivative in coordinate i of point n:
    4 deg_n(W) + 8 sum_m c_nm (x_in - x_im)^2 minus, for normalized
    models, 16 lam (X L^q)_{in}^2.
    """
    X = _as_embedding(X, model)
    T = backend.get_backend("numpy").emb_sqdist(X)
    mw = model_weights(X, model)
    degW = mw.W.sum(axis=1)
    C = _xx_coefficients(model, T, mw.Q)
    cdeg = C.sum(axis=1)
    X2 = X * X
    diag = 4.0 * degW[None, :] + 8.0 * (X2 * cdeg[None, :] - 2.0 * X * (X @ C) + X2 @ C)
    if model.normalized:
        mlq = X * mw.Wq.sum(axis=1)[None, :] - X @ mw.Wq
        diag = diag - 16.0 * model.lam * mlq * mlq
    return diag


def xx_diag_weights(X, model):
    """Same-dimension Hessian block weights, clamped psd, shape (d, N, N).

    Clamping at zero from below only matters for the Student-t kernel,
    whose block weights can go negative; Gaussian-kernel weights are
    already nonnegative.
    """
    X = _as_embedding(X, model)
    T = backend.get_backend("numpy").emb_sqdist(X)
    Q = compute_q(X, model) if model.normalized else None
    C = np.maximum(_xx_coefficients(model, T, Q), 0.0)
    d, n = X.shape
    out = np.empty((d, n, n))
    for i in range(d):
        diff = X[i][:, None] - X[i][None, :]
        out[i] = C * diff * diff
    return out


def full_hessian(X, model):
    """Dense (Nd, Nd) Hessian in point-major block order; small-N reference.

    Block (n, m) has (i, j) entry 4 l_nm delta_ij + 8 Lxx[(i,n),(j,m)],
    minus the rank-one repulsion term for normalized models. Each Lxx
    slice is the Laplacian over points of the (i, j) block weights.
    """
    X = _as_embedding(X, model)
    d, n = X.shape
    if n > ORACLE_N_CAP:
        raise OracleScaleExceeded(f"N = {n} exceeds the cap {ORACLE_N_CAP}")
    T = backend.get_backend("numpy").emb_sqdist(X)
    mw = model_weights(X, model)
    L = graph_laplacian(mw.W).matrix
    H = np.kron(4.0 * L, np.eye(d))
    C = _xx_coefficients(model, T, mw.Q)
    diffs = X[:, :, None] - X[:, None, :]  # (d, N, N)
    for i in range(d):
        rows = np.arange(n) * d + i
        for j in range(d):
            omega = C * diffs[i] * diffs[j]
            Lij = np.diag(omega.sum(axis=1)) - omega
            H[np.ix_(rows, np.arange(n) * d + j)] += 8.0 * Lij
    if model.normalized and model.lam != 0.0:
        mlq = X * mw.Wq.sum(axis=1)[None, :] - X @ mw.Wq
        v = mlq.T.ravel()  # point-major
        H -= 16.0 * model.lam * np.outer(v, v)
    return H
