"""Descent-direction strategies, backtracking line search, outer loop.

Every strategy produces a direction P from the current gradient g by
(implicitly or explicitly) solving B p = -g for some positive-definite
curvature model B:

* ``gd``     - B = I (steepest descent);
* ``fp``     - B = 4 D+ (degree diagonal of the attractive Laplacian);
* ``diagh``  - B = diag of the exact Hessian, clamped positive;
* ``sd``     - B = 4 L+ + mu I, kappa-sparsified, Cholesky-factored once
               before iterating and reused via two triangular backsolves;
* ``sdm``    - B = 4 L+ + 8 (same-dimension Hessian blocks, clamped psd)
               + mu I, solved inexactly by warm-started linear CG;
* ``lbfgs``  - implicit inverse-Hessian estimate (two-loop recursion);
* ``ncg``    - Polak-Ribiere+ nonlinear conjugate gradients.

A positive-definite B guarantees descent (p'g < 0); strategies that can
lose that property (lbfgs, ncg, inexact sdm) are reset to -g for the
iteration whenever p'g >= 0. Steps are accepted by a backtracking line
search on the sufficient-decrease (first Wolfe) condition with an
adaptive initial step: start at 1, then reuse the previously accepted
step, which never increases within one minimization run.
"""

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .affinity import graph_laplacian, knn_sparsify
from .errors import (
    BreakdownNonPSD,
    CacheMissing,
    LineSearchFailed,
    NotPositiveDefinite,
)
from .linalg import cholesky_factorize, linear_cg, solve_via_factor
from .models import (
    attractive_laplacian,
    eval_error,
    eval_gradient,
    hessian_diagonal,
    model_weights,
    xx_diag_weights,
)

CONVERGED = "converged"
MAX_ITERS = "max_iters"
TIME_BUDGET = "time_budget"
LINE_SEARCH_FAILED = "line_search_failed"


@dataclass
class LineSearchConfig:
    c1: float = 1e-4          # sufficient-decrease constant
    rho: float = 0.5          # backtracking factor
    max_tries: int = 60
    adaptive_init: bool = True

    def __post_init__(self):
        if not 0.0 < self.c1 < 1.0:
            raise ValueError("c1 must be in (0, 1)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0, 1)")


@dataclass
class StopRule:
    """Termination rule for minimize.

    grad_tol defaults to 1e-6 times the initial gradient infinity norm.
    target_error stops once the error falls to the given level (used by
    the fixed-endpoint races).
    """

    grad_tol: float = None
    rel_tol: float = 1e-8
    max_iters: int = 10000
    time_budget: float = None
    target_error: float = None


@dataclass
class TraceRecord:
    iteration: int
    error: float
    grad_inf: float
    step: float
    fevals: int
    seconds: float
    descent_dot: float = None   # diagnostics below here, not in the CSV schema
    dir_seconds: float = None
    grad_seconds: float = None


@dataclass
class OptTrace:
    """Per-iteration log of one minimization run."""

    initial_error: float
    records: list = field(default_factory=list)
    status: str = None
    rate: float = None  # local per-iteration contraction estimate

    def add(self, rec):
        self.records.append(rec)

    @property
    def iterations(self):
        return len(self.records)

    @property
    def final_error(self):
        return self.records[-1].error if self.records else self.initial_error

    @property
    def total_fevals(self):
        # the initial error evaluation plus every line-search trial
        return 1 + sum(r.fevals for r in self.records)

    @property
    def seconds(self):
        return self.records[-1].seconds if self.records else 0.0

    def errors(self):
        return np.array([r.error for r in self.records])


def default_damping(degrees):
    """Damping mu = 1e-10 * (minimum degree of L+), kept strictly positive.

    A positive mu bounds the condition number of the factored matrix,
    which is what the global-convergence guarantee asks of B. Graphs with
    an isolated vertex (zero min degree) fall back to the max degree.
    """
    degrees = np.asarray(degrees)
    mu = 1e-10 * float(degrees.min())
    if not mu > 0.0:
        mu = 1e-10 * max(float(degrees.max()), 1.0)
    return mu


def sd_prepare(wplus, kappa=None, mu=None, max_retries=3):
    """Factor the spectral-direction matrix B = 4 L(W+_kappa) + mu I.

    kappa = N (default) keeps the full attractive Laplacian; kappa = 0
    uses the degree diagonal of the *unsparsified* L+ (which makes the
    resulting direction the fixed-point diagonal one); intermediate kappa
    sparsifies W+ to a k-nearest-neighbor graph first, which keeps the
    Cholesky factor sparse.

    Retries with mu * 10 (up to max_retries) when a pivot fails before
    giving up, since a too-small mu on a psd-but-singular Laplacian is the
    expected failure mode.
    """
    n = wplus.order
    kappa = n if kappa is None else int(kappa)
    if not 0 <= kappa <= n:
        raise ValueError(f"kappa must be in [0, {n}], got {kappa}")
    degrees = graph_laplacian(wplus).degrees
    if mu is None:
        mu = default_damping(degrees)
    if kappa == 0:
        B = sp.diags(4.0 * degrees, format="csr")
    elif kappa >= n:
        B = graph_laplacian(wplus).matrix
        B = 4.0 * B
    else:
        B = 4.0 * graph_laplacian(knn_sparsify(wplus, kappa)).matrix
    last = None
    for _ in range(max_retries + 1):
        try:
            return cholesky_factorize(B, mu)
        except NotPositiveDefinite as exc:
            last = exc
            mu = 10.0 * mu if mu > 0.0 else default_damping(degrees)
    raise last


class DirectionStrategy:
    """Base class: prepare once per model, then map gradients to directions."""

    kind = None

    def prepare(self, model, X0):
        pass

    def direction(self, X, g):
        raise NotImplementedError

    def after_step(self, X_old, g_old, X_new, g_new, alpha, used_direction):
        pass


class GradientDescent(DirectionStrategy):
    kind = "gd"

    def direction(self, X, g):
        return -g


class FixedPointDiag(DirectionStrategy):
    """Jacobi-style direction from the attractive degree diagonal.

    Computed as -g / (4 deg+), which is the split form
    X (D+ - L)(D+)^{-1} - X written in terms of the gradient g = 4 X L.
    """

    kind = "fp"

    def __init__(self):
        self._deg = None

    def prepare(self, model, X0):
        deg = attractive_laplacian(model).degrees
        if deg.min() <= 0.0:
            raise ValueError("fixed-point direction needs positive degrees")
        self._deg = deg

    def direction(self, X, g):
        if self._deg is None:
            raise CacheMissing("fp used before prepare()")
        return -g / (4.0 * self._deg)[None, :]


def fp_split_form(X, model):
    """Literal fixed-point direction X (D+ - L)(D+)^{-1} - X.

    Algebraically identical to the production -g/(4 deg+) path; kept as
    the independent second route for the equivalence check.
    """
    W = model_weights(X, model).W
    L = graph_laplacian(W).matrix
    dplus = attractive_laplacian(model).degrees
    return X @ (np.diag(dplus) - L) @ np.diag(1.0 / dplus) - X


class DiagHessian(DirectionStrategy):
    """Direction from the exact Hessian diagonal, clamped positive."""

    kind = "diagh"

    def __init__(self):
        self._model = None

    def prepare(self, model, X0):
        self._model = model

    def direction(self, X, g):
        if self._model is None:
            raise CacheMissing("diagh used before prepare()")
        diag = hessian_diagonal(X, self._model)
        scale = np.abs(diag).max()
        if scale == 0.0:
            return -g
        return -g / np.maximum(diag, 1e-10 * scale)


class SpectralDirection(DirectionStrategy):
    """Cached-Cholesky direction from the (sparsified) attractive Laplacian.

    The factor is computed once before the first iteration and reused;
    refresh_every re-runs the factorization periodically, but since the
    attractive Laplacian is held constant for every model (t-SNE uses its
    X = 0 curvature), the default of never refreshing is the recipe.
    """

    kind = "sd"

    def __init__(self, kappa=None, mu=None, refresh_every=None):
        self.kappa = kappa
        self.mu = mu
        self.refresh_every = refresh_every
        self._factor = None
        self._wplus = None
        self._steps = 0

    def prepare(self, model, X0):
        if self._factor is None or self._wplus is not model.wplus:
            self._factor = sd_prepare(model.wplus, self.kappa, self.mu)
            self._wplus = model.wplus
            self._steps = 0

    def direction(self, X, g):
        if self._factor is None:
            raise CacheMissing("sd used before prepare()")
        return solve_via_factor(self._factor, g)

    def after_step(self, X_old, g_old, X_new, g_new, alpha, used_direction):
        self._steps += 1
        if self.refresh_every and self._steps % self.refresh_every == 0:
            self._factor = sd_prepare(self._wplus, self.kappa, self.mu)


class SpectralDirectionMinus(DirectionStrategy):
    """Spectral direction augmented with the same-dimension Hessian blocks.

    Solves (4 L+ + 8 Lxx_diag + mu I) vec(P) = -vec(g) inexactly with
    linear CG, warm-started at the previous iteration's solution, exiting
    at the relative tolerance or the iteration cap, whichever first. A
    curvature breakdown (possible only through rounding, the operator is
    psd by construction) falls back to steepest descent for the iteration.
    """

    kind = "sdm"

    def __init__(self, cg_tol=0.1, cg_max=50, mu=None):
        self.cg_tol = cg_tol
        self.cg_max = cg_max
        self.mu = mu
        self._model = None
        self._L = None
        self._mu = None
        self._prev = None

    def prepare(self, model, X0):
        lap = attractive_laplacian(model)
        self._model = model
        self._L = lap.matrix
        self._mu = self.mu if self.mu is not None else default_damping(lap.degrees)
        self._prev = None

    def direction(self, X, g):
        if self._model is None:
            raise CacheMissing("sdm used before prepare()")
        omega = xx_diag_weights(X, self._model)
        deg = omega.sum(axis=2)
        L, mu = self._L, self._mu

        def apply_b(P):
            attract = 4.0 * (L @ P.T).T
            repulse = 8.0 * (deg * P - np.einsum("inm,im->in", omega, P))
            return attract + repulse + mu * P

        x0 = self._prev if self._prev is not None and self._prev.shape == g.shape else None
        try:
            sol, _ = linear_cg(apply_b, -g, x0=x0, rel_tol=self.cg_tol,
                               max_iter=self.cg_max)
        except BreakdownNonPSD:
            sol = -g
        self._prev = sol.copy()
        return sol


class LBFGS(DirectionStrategy):
    """Limited-memory BFGS via the two-loop recursion.

    Stores up to m (s, y) pairs; a pair is skipped when its curvature
    s'y <= 1e-10 ||s|| ||y||, which keeps the implicit matrix positive
    definite. m = None keeps every pair (useful on small problems).
    """

    kind = "lbfgs"

    def __init__(self, m=100):
        self.m = m
        self._pairs = deque(maxlen=m)

    def prepare(self, model, X0):
        self._pairs = deque(maxlen=self.m)

    def direction(self, X, g):
        if not self._pairs:
            return -g
        q = g.ravel().copy()
        alphas = []
        for s, y, rho in reversed(self._pairs):
            a = rho * float(s @ q)
            q -= a * y
            alphas.append(a)
        s, y, _ = self._pairs[-1]
        q *= float(s @ y) / float(y @ y)  # standard initial scaling
        for (s, y, rho), a in zip(self._pairs, reversed(alphas)):
            b = rho * float(y @ q)
            q += s * (a - b)
        return -q.reshape(g.shape)

    def after_step(self, X_old, g_old, X_new, g_new, alpha, used_direction):
        s = (X_new - X_old).ravel()
        y = (g_new - g_old).ravel()
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            self._pairs.append((s, y, 1.0 / sy))


class NonlinearCG(DirectionStrategy):
    """Polak-Ribiere+ nonlinear conjugate gradients.

    beta is clamped at zero (restart to steepest descent) and the method
    additionally restarts every N*d iterations.
    """

    kind = "ncg"

    def __init__(self, restart_cycle=None):
        self.restart_cycle = restart_cycle
        self._g_prev = None
        self._p_prev = None
        self._since_restart = 0

    def prepare(self, model, X0):
        self._g_prev = None
        self._p_prev = None
        self._since_restart = 0

    def direction(self, X, g):
        cycle = self.restart_cycle or g.size
        if self._g_prev is None or self._since_restart >= cycle:
            self._since_restart = 0
            return -g
        denom = float(np.vdot(self._g_prev, self._g_prev))
        beta = float(np.vdot(g, g - self._g_prev)) / denom
        if beta < 0.0:
            self._since_restart = 0
            return -g
        return -g + beta * self._p_prev

    def after_step(self, X_old, g_old, X_new, g_new, alpha, used_direction):
        self._g_prev = g_old.copy()
        self._p_prev = used_direction.copy()
        self._since_restart += 1


STRATEGIES = {
    "gd": GradientDescent,
    "fp": FixedPointDiag,
    "diagh": DiagHessian,
    "sd": SpectralDirection,
    "sdm": SpectralDirectionMinus,
    "lbfgs": LBFGS,
    "ncg": NonlinearCG,
}


def make_strategy(name, **options):
    """Instantiate a strategy by its CLI name (gd, fp, diagh, sd, sdm, lbfgs, ncg)."""
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(
            f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}"
        ) from None
    return cls(**options)


def line_search(f, X, P, g, alpha_init=1.0, cfg=None, E0=None):
    """Backtracking line search on the sufficient-decrease condition.

    Tries alpha_init, alpha_init * rho, ... and accepts the first step with
    f(X + alpha P) <= f(X) + c1 * alpha * <P, g>. Returns
    (alpha, new error, number of f evaluations). Raises LineSearchFailed
    after max_tries rejections, which signals a non-descent direction or a
    badly scaled problem.
    """
    if alpha_init <= 0.0:
        raise ValueError("alpha_init must be positive")
    cfg = cfg if cfg is not None else LineSearchConfig()
    if E0 is None:
        E0 = f(X)
    dot = float(np.vdot(P, g))
    if dot >= 0.0:
        raise LineSearchFailed(f"not a descent direction (dot {dot:.3e})")
    alpha = float(alpha_init)
    evals = 0
    for _ in range(cfg.max_tries):
        E_new = f(X + alpha * P)
        evals += 1
        if E_new <= E0 + cfg.c1 * alpha * dot:
            return alpha, E_new, evals
        alpha *= cfg.rho
    raise LineSearchFailed(
        f"no sufficient decrease within {cfg.max_tries} backtracks "
        f"(descent dot {dot:.3e})"
    )


def _estimate_rate(recent, X_final, n_iterations):
    """Slope-based contraction factor of ||X_k - X_final|| over the tail."""
    if n_iterations < 12 or len(recent) < 3:
        return None
    tail = list(recent)[:-1][-10:]
    ks, logs = [], []
    for k, Z in enumerate(tail):
        dist = float(np.linalg.norm(Z - X_final))
        if dist > 0.0:
            ks.append(k)
            logs.append(np.log(dist))
    if len(ks) < 2:
        return None
    slope = np.polyfit(ks, logs, 1)[0]
    return float(np.exp(slope))


def minimize(X0, model, strategy, stop=None, ls=None):
    """Line-search descent on the model error from X0 with one strategy.

    Iterates direction + backtracking until the gradient infinity norm
    falls below grad_tol, the relative error decrease falls below rel_tol,
    max_iters or the time budget is reached, or the line search fails.
    Returns (X, OptTrace); the trace's recorded errors decrease strictly.
    Deterministic given its inputs.
    """
    stop = stop if stop is not None else StopRule()
    ls = ls if ls is not None else LineSearchConfig()
    X = np.array(X0, dtype=np.float64, order="C", copy=True)
    strategy.prepare(model, X)
    E = eval_error(X, model)
    g = eval_gradient(X, model)
    grad_tol = stop.grad_tol
    if grad_tol is None:
        grad_tol = 1e-6 * np.abs(g).max()
    trace = OptTrace(initial_error=E)
    recent = deque(maxlen=12)
    recent.append(X.copy())
    start = time.perf_counter()
    status = MAX_ITERS
    err = lambda Z: eval_error(Z, model)
    alpha_init = 1.0
    for k in range(1, stop.max_iters + 1):
        if np.abs(g).max() <= grad_tol:
            status = CONVERGED
            break
        if stop.time_budget is not None and time.perf_counter() - start >= stop.time_budget:
            status = TIME_BUDGET
            break
        t0 = time.perf_counter()
        P = strategy.direction(X, g)
        t_dir = time.perf_counter() - t0
        dot = float(np.vdot(P, g))
        if dot >= 0.0:  # quasi-Newton/CG state can go stale; fall back
            P = -g
            dot = -float(np.vdot(g, g))
        try:
            a0 = alpha_init if ls.adaptive_init else 1.0
            alpha, E_new, evals = line_search(err, X, P, g, a0, ls, E0=E)
        except LineSearchFailed:
            status = LINE_SEARCH_FAILED
            break
        X_new = X + alpha * P
        t0 = time.perf_counter()
        g_new = eval_gradient(X_new, model)
        t_grad = time.perf_counter() - t0
        strategy.after_step(X, g, X_new, g_new, alpha, P)
        rel_dec = (E - E_new) / max(1.0, abs(E_new))
        X, g, E = X_new, g_new, E_new
        alpha_init = alpha  # adaptive init: never increases within a run
        trace.add(TraceRecord(
            iteration=k,
            error=E,
            grad_inf=float(np.abs(g).max()),
            step=alpha,
            fevals=evals,
            seconds=time.perf_counter() - start,
            descent_dot=dot,
            dir_seconds=t_dir,
            grad_seconds=t_grad,
        ))
        recent.append(X.copy())
        if stop.target_error is not None and E <= stop.target_error:
            status = CONVERGED
            break
        if rel_dec <= stop.rel_tol:
            status = CONVERGED
            break
    trace.status = status
    trace.rate = _estimate_rate(recent, X, trace.iterations)
    return X, trace
