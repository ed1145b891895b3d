"""Homotopy optimization, optimizer races, synthetic benchmark data.

The homotopy driver follows the minimum path of E(X; lam) along an
increasing lam schedule, warm-starting every stage from the previous
minimizer. The race harness runs (seed, strategy) cells under one of
three regimes: a shared random start, a wall-clock budget, or fixed
endpoints (every method chases the error level of a reference minimum
from a common nearby start).
"""

import statistics
from dataclasses import dataclass, field

import numpy as np

from .errors import EmbedOptError
from .models import eval_error
from .optimize import LineSearchConfig, StopRule, make_strategy, minimize


@dataclass(frozen=True)
class HomotopySchedule:
    """Increasing repulsion weights plus the per-stage stopping rule."""

    lambdas: tuple
    rel_tol: float = 1e-6
    max_iters: int = 10000

    def __post_init__(self):
        lams = tuple(float(v) for v in self.lambdas)
        if not lams:
            raise ValueError("schedule must be nonempty")
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambdas must be strictly increasing")
        if lams[0] <= 0:
            raise ValueError("lambdas must be positive")
        object.__setattr__(self, "lambdas", lams)

    @classmethod
    def log_spaced(cls, lam_min=1e-4, lam_max=1e2, steps=50, **kw):
        return cls(tuple(np.logspace(np.log10(lam_min), np.log10(lam_max), steps)), **kw)


@dataclass
class HomotopyStage:
    lam: float
    error: float
    iterations: int
    fevals: int
    seconds: float
    step_norm: float  # ||X(lam_i) - X(lam_{i-1})||, warm-start continuity


def default_init(n, dim=2, seed=0, scale=1e-4):
    """Small Gaussian starting embedding.

    The exact zero configuration is a stationary point of every model
    (the gradient 4XL vanishes), so runs start from seeded noise instead.
    """
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal((dim, n))


def homotopy_run(model_at, schedule, strategy, X_init, ls=None):
    """Minimize along the lam schedule, warm-starting each stage.

    model_at maps lam to an EmbeddingModel (sharing affinities across
    stages lets the spectral direction keep its cached factor). The line
    search restarts at step 1 on every lam increase. Returns the final
    embedding and the per-stage statistics; optimizer errors are re-raised
    with the failing lam attached.
    """
    X = np.array(X_init, dtype=np.float64, copy=True)
    stages = []
    for lam in schedule.lambdas:
        model = model_at(lam)
        stop = StopRule(grad_tol=0.0, rel_tol=schedule.rel_tol,
                        max_iters=schedule.max_iters)
        X_prev = X
        try:
            X, trace = minimize(X, model, strategy, stop=stop, ls=ls)
        except EmbedOptError as exc:
            raise type(exc)(f"homotopy stage lam={lam:g}: {exc}") from exc
        stages.append(HomotopyStage(
            lam=lam,
            error=trace.final_error,
            iterations=trace.iterations,
            fevals=trace.total_fevals,
            seconds=trace.seconds,
            step_norm=float(np.linalg.norm(X - X_prev)),
        ))
    return X, stages


@dataclass
class BenchRow:
    seed: int
    strategy: str
    final_error: float
    iterations: int
    fevals: int
    seconds: float
    status: str


@dataclass
class BenchReport:
    regime: str
    rows: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)  # (seed, strategy) -> OptTrace

    def aggregate(self):
        """Per-strategy (median, min, max) of the final errors."""
        out = {}
        by_strategy = {}
        for r in self.rows:
            by_strategy.setdefault(r.strategy, []).append(r.final_error)
        for name, errs in by_strategy.items():
            out[name] = (statistics.median(errs), min(errs), max(errs))
        return out


SAME_START = "same-start"
TIME_BUDGET_REGIME = "time-budget"
FIXED_ENDPOINTS = "fixed-endpoints"


def bench_race(model, strategies, seeds, regime=SAME_START, budget_s=None,
               stop=None, init_scale=1e-4, perturb_scale=1e-2,
               target_slack=1e-6, strategy_options=None, ls=None):
    """Race strategies over seeded starts; returns a BenchReport.

    * same-start: all strategies share each seed's small random X0 and run
      under ``stop`` (default StopRule());
    * time-budget: each cell stops at ``budget_s`` wall seconds;
    * fixed-endpoints: a high-accuracy spectral-direction run first
      produces the reference minimum X_inf; each seed perturbs X_inf and
      every strategy runs until its error reaches E(X_inf) + target_slack.

    strategy_options maps a strategy name to keyword arguments for its
    constructor; fresh strategy instances are built per cell so no cache
    leaks across runs.
    """
    if not strategies:
        raise ValueError("need at least one strategy")
    if seeds < 1:
        raise ValueError("need at least one seed")
    options = strategy_options or {}
    n, d = model.order, model.dim

    target = None
    if regime == TIME_BUDGET_REGIME:
        if budget_s is None:
            raise ValueError("time-budget regime needs budget_s")
        cell_stop = StopRule(grad_tol=0.0, rel_tol=0.0, max_iters=10**8,
                             time_budget=budget_s)
    elif regime == FIXED_ENDPOINTS:
        ref_strategy = make_strategy("sd", **options.get("sd", {}))
        X_ref, _ = minimize(
            default_init(n, d, seed=0, scale=init_scale), model, ref_strategy,
            stop=StopRule(rel_tol=1e-12, max_iters=(stop.max_iters if stop else 10000)),
        )
        target = eval_error(X_ref, model) + target_slack
        base = stop if stop is not None else StopRule()
        cell_stop = StopRule(grad_tol=0.0, rel_tol=0.0, max_iters=base.max_iters,
                             time_budget=base.time_budget, target_error=target)
    elif regime == SAME_START:
        cell_stop = stop if stop is not None else StopRule()
        X_ref = None
    else:
        raise ValueError(f"unknown regime {regime!r}")

    report = BenchReport(regime=regime)
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        if regime == FIXED_ENDPOINTS:
            X0 = X_ref + perturb_scale * rng.standard_normal((d, n))
        else:
            X0 = init_scale * rng.standard_normal((d, n))
        for name in strategies:
            strat = make_strategy(name, **options.get(name, {}))
            _, trace = minimize(X0, model, strat, stop=cell_stop, ls=ls)
            report.rows.append(BenchRow(
                seed=seed,
                strategy=name,
                final_error=trace.final_error,
                iterations=trace.iterations,
                fevals=trace.total_fevals,
                seconds=trace.seconds,
                status=trace.status,
            ))
            report.traces[(seed, name)] = trace
    return report


def gaussian_clusters(n_points, dim=10, clusters=10, seed=0, center_scale=8.0,
                      spread=1.0):
    """Synthetic benchmark data: Gaussian blobs around random centers.

    Returns a (dim, n_points) data matrix and the cluster labels; fully
    determined by the seed.
    """
    rng = np.random.default_rng(seed)
    centers = center_scale * rng.standard_normal((clusters, dim))
    labels = np.arange(n_points) % clusters
    Y = centers[labels] + spread * rng.standard_normal((n_points, dim))
    return Y.T, labels
