"""End-to-end acceptance suite.

Each test covers one criterion at its stated tolerance and prints one
pass/fail line (run pytest with -s to see them). The optimizer races run
on a 10-cluster Gaussian synthetic benchmark at desk scale; criterion
runtime caps assume the compiled kernel backend.
"""

import time

import numpy as np
import pytest

from embedopt.affinity import graph_laplacian, sne_affinities
from embedopt.driver import (
    HomotopySchedule,
    default_init,
    gaussian_clusters,
    homotopy_run,
)
from embedopt.models import (
    EmbeddingModel,
    complete_graph,
    eval_error,
    eval_gradient,
    full_hessian,
    make_model,
)
from embedopt.optimize import (
    LINE_SEARCH_FAILED,
    SpectralDirection,
    StopRule,
    make_strategy,
    minimize,
)

from oracles import (
    ALL_KINDS,
    fd_gradient,
    fd_hessian,
    laplacian_quadratic_form,
    random_model,
    random_nonneg_weights,
    random_orthogonal,
)


def report(name, ok, detail=""):
    print(f"\n[acceptance] {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def bench1000():
    Y, _ = gaussian_clusters(1000, dim=10, clusters=10, seed=42)
    return sne_affinities(Y, perplexity=20.0)


@pytest.fixture(scope="module")
def bench300():
    Y, _ = gaussian_clusters(300, dim=10, clusters=10, seed=42)
    return sne_affinities(Y, perplexity=20.0)


def test_c01_gradient_correctness():
    t0 = time.perf_counter()
    worst = 0.0
    for kind in ALL_KINDS:
        rng = np.random.default_rng(101)
        for _ in range(20):
            model = random_model(kind, rng, 10)
            X = rng.standard_normal((2, 10))
            G = eval_gradient(X, model)
            G_fd = fd_gradient(lambda Z: eval_error(Z, model), X, h=1e-5)
            rel = np.abs(G - G_fd).max() / np.abs(G_fd).max()
            worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    report("C1 gradient-vs-finite-differences", worst <= 1e-5 and elapsed < 10.0,
           f"(max rel err {worst:.2e}, {elapsed:.1f}s)")


def test_c02_hessian_correctness():
    t0 = time.perf_counter()
    worst = 0.0
    for kind in ALL_KINDS:
        rng = np.random.default_rng(202)
        for _ in range(5):
            model = random_model(kind, rng, 5)
            X = 0.8 * rng.standard_normal((2, 5))
            H = full_hessian(X, model)
            H_fd = fd_hessian(lambda Z: eval_gradient(Z, model), X, h=1e-4)
            scale = np.maximum(np.abs(H), np.abs(H_fd))
            mask = scale > 1e-8
            rel = (np.abs(H - H_fd)[mask] / scale[mask]).max()
            worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    report("C2 hessian-vs-finite-differences", worst <= 1e-4 and elapsed < 30.0,
           f"(max rel err {worst:.2e}, {elapsed:.1f}s)")


def test_c03_laplacian_psd_and_quadratic_form():
    rng = np.random.default_rng(303)
    worst_eig = np.inf
    worst_qf = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 41))
        W = random_nonneg_weights(rng, n)
        lap = graph_laplacian(W)
        eigs = np.linalg.eigvalsh(lap.matrix)
        worst_eig = min(worst_eig, eigs.min() / lap.degrees.max())
        for _ in range(20):
            u = rng.standard_normal(n)
            qf = float(u @ lap.matrix @ u)
            ref = laplacian_quadratic_form(W, u)
            worst_qf = max(worst_qf, abs(qf - ref) / max(abs(ref), 1.0))
    ok = worst_eig >= -1e-10 and worst_qf <= 1e-10
    report("C3 laplacian-psd-and-quadratic-form", ok,
           f"(min eig/maxdeg {worst_eig:.2e}, max qf err {worst_qf:.2e})")


def test_c04_strategy_identities():
    rng = np.random.default_rng(404)
    # SD at kappa = 0 reproduces the fixed-point diagonal direction
    worst = 0.0
    for _ in range(3):
        model = random_model("ssne", rng, 30)
        X = rng.standard_normal((2, 30))
        g = eval_gradient(X, model)
        sd = make_strategy("sd", kappa=0)
        sd.prepare(model, X)
        fp = make_strategy("fp")
        fp.prepare(model, X)
        P_sd, P_fp = sd.direction(X, g), fp.direction(X, g)
        worst = max(worst, np.abs(P_sd - P_fp).max() / np.abs(P_fp).max())
    # EE at lam = 0 has the constant spectral Hessian: damped Newton
    # converges in at most 2 iterations
    model = random_model("ee", rng, 30, lam=0.0)
    X0 = rng.standard_normal((2, 30))
    X, trace = minimize(X0, model, SpectralDirection(),
                        stop=StopRule(grad_tol=1e-8, rel_tol=0.0, max_iters=5))
    gmax = np.abs(eval_gradient(X, model)).max()
    ok = worst <= 1e-10 and trace.iterations <= 2 and gmax <= 1e-8
    report("C4 strategy-identities", ok,
           f"(sd0-vs-fp {worst:.2e}, newton iters {trace.iterations}, "
           f"grad {gmax:.2e})")


def test_c05_descent_and_monotonicity(bench300):
    t0 = time.perf_counter()
    model = make_model("ssne", bench300, lam=1.0)
    robust = {"gd", "fp", "diagh", "sd"}
    failures = []
    for seed in range(3):
        X0 = default_init(300, 2, seed=seed)
        for name in ("gd", "fp", "diagh", "sd", "sdm", "lbfgs", "ncg"):
            _, trace = minimize(X0, model, make_strategy(name),
                                stop=StopRule(max_iters=500))
            errs = np.concatenate([[trace.initial_error], trace.errors()])
            if not np.all(np.diff(errs) < 0):
                failures.append(f"{name}/seed{seed}: non-monotone")
            if not all(r.descent_dot < 0 for r in trace.records):
                failures.append(f"{name}/seed{seed}: non-descent accepted")
            if name in robust and trace.status == LINE_SEARCH_FAILED:
                failures.append(f"{name}/seed{seed}: line search failed")
    elapsed = time.perf_counter() - t0
    report("C5 descent-and-monotonicity", not failures,
           f"(3 seeds x 7 strategies x <=500 iters, {elapsed:.0f}s)"
           + (f" {failures}" if failures else ""))


def test_c06_invariances():
    rng = np.random.default_rng(606)
    worst_shift = worst_rot = worst_sum = 0.0
    for kind in ALL_KINDS:
        for _ in range(20):
            model = random_model(kind, rng, 9)
            X = rng.standard_normal((2, 9))
            E = eval_error(X, model)
            c = rng.standard_normal((2, 1))
            worst_shift = max(worst_shift,
                              abs(eval_error(X + c, model) - E) / (1 + abs(E)))
            U = random_orthogonal(rng, 2)
            worst_rot = max(worst_rot,
                            abs(eval_error(U @ X, model) - E) / (1 + abs(E)))
            G = eval_gradient(X, model)
            worst_sum = max(worst_sum,
                            np.abs(G.sum(axis=1)).max() / max(1.0, np.abs(G).max()))
    ok = worst_shift <= 1e-10 and worst_rot <= 1e-10 and worst_sum <= 1e-10
    report("C6 shift-rotation-invariance", ok,
           f"(shift {worst_shift:.2e}, rot {worst_rot:.2e}, gsum {worst_sum:.2e})")


def _iterations_to_reach(model, name, X0, target, cap):
    strat = make_strategy(name)
    _, trace = minimize(X0, model, strat,
                        stop=StopRule(grad_tol=0.0, rel_tol=0.0,
                                      max_iters=cap, target_error=target))
    if trace.final_error <= target:
        return trace.iterations, trace
    return np.inf, trace


@pytest.fixture(scope="module")
def race_results(bench1000):
    """SD/FP/GD race on the N=1000 benchmark, shared by C7 and C8."""
    t0 = time.perf_counter()
    out = {}
    wminus = complete_graph(1000)
    for kind, lam in (("ssne", 1.0), ("ee", 100.0)):
        model = EmbeddingModel(kind, lam, bench1000,
                               wminus if kind == "ee" else None, 2)
        X0 = default_init(1000, 2, seed=0)
        _, sd_trace = minimize(X0, model, SpectralDirection(),
                               stop=StopRule(grad_tol=0.0, rel_tol=0.0,
                                             max_iters=50))
        target = sd_trace.final_error
        fp_iters, _ = _iterations_to_reach(model, "fp", X0, target, 10000)
        gd_iters, _ = _iterations_to_reach(model, "gd", X0, target, 10000)
        out[kind] = dict(sd_trace=sd_trace, sd_iters=sd_trace.iterations,
                         fp_iters=fp_iters, gd_iters=gd_iters)
    out["seconds"] = time.perf_counter() - t0
    return out


def test_c07_speedup_ordering(race_results):
    ok = race_results["seconds"] < 600.0
    details = []
    for kind in ("ssne", "ee"):
        r = race_results[kind]
        sd, fp, gd = r["sd_iters"], r["fp_iters"], r["gd_iters"]
        ok = ok and (sd < fp < gd) and (sd <= gd / 5.0)
        details.append(f"{kind}: sd {sd} < fp {fp} < gd {gd}")
    report("C7 speedup-ordering", ok,
           f"({'; '.join(details)}; {race_results['seconds']:.0f}s)")


def test_c08_sd_overhead(race_results):
    # factor cached: per-iteration direction cost below gradient cost
    ok = True
    details = []
    for kind in ("ssne", "ee"):
        trace = race_results[kind]["sd_trace"]
        dir_med = float(np.median([r.dir_seconds for r in trace.records]))
        grad_med = float(np.median([r.grad_seconds for r in trace.records]))
        ok = ok and dir_med <= grad_med
        details.append(f"{kind}: dir {1e3 * dir_med:.2f}ms <= "
                       f"grad {1e3 * grad_med:.2f}ms")
    report("C8 sd-overhead", ok, f"({'; '.join(details)})")


def test_c09_homotopy_quality(bench1000):
    t0 = time.perf_counter()
    wminus = complete_graph(1000)
    model_at = lambda lam: EmbeddingModel("ee", lam, bench1000, wminus, 2)
    schedule = HomotopySchedule.log_spaced(1e-4, 1e2, 50, rel_tol=1e-6,
                                           max_iters=10000)
    final = model_at(100.0)
    wins = 0
    pairs = []
    for seed in range(10):
        X0 = default_init(1000, 2, seed=seed)
        _, stages = homotopy_run(model_at, schedule, SpectralDirection(), X0)
        e_homotopy = stages[-1].error
        _, trace = minimize(X0, final, SpectralDirection(),
                            stop=StopRule(grad_tol=0.0, rel_tol=1e-6,
                                          max_iters=10000))
        e_direct = trace.final_error
        pairs.append((e_homotopy, e_direct))
        if e_homotopy <= e_direct:
            wins += 1
    elapsed = time.perf_counter() - t0
    ok = wins >= 7 and elapsed < 900.0
    report("C9 homotopy-beats-direct", ok,
           f"(deeper minimum in {wins}/10 seeds, {elapsed:.0f}s)")


def test_c10_cli_determinism(tmp_path):
    from embedopt import fileio
    from embedopt.cli import run_cli

    Y, _ = gaussian_clusters(60, dim=6, clusters=6, seed=3)
    data = tmp_path / "pts.txt"
    fileio.write_data(data, Y)

    def run(tag):
        out = tmp_path / f"X{tag}.csv"
        trace = tmp_path / f"T{tag}.csv"
        code = run_cli([
            "embed", "--model", "ssne", "--data", str(data),
            "--perplexity", "10", "--optimizer", "sd", "--max-iters", "80",
            "--seed", "11", "--out", str(out), "--trace", str(trace),
        ])
        assert code == 0
        stripped = []
        for line in trace.read_text().splitlines():
            if line.startswith(("#", "iter,")):
                stripped.append(line)
            else:
                stripped.append(",".join(line.split(",")[:5]))
        return out.read_bytes(), "\n".join(stripped)

    emb1, tr1 = run("a")
    emb2, tr2 = run("b")
    ok = emb1 == emb2 and tr1 == tr2
    report("C10 cli-determinism", ok,
           "(byte-identical embedding and trace, timing column aside)")
