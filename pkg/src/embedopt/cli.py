"""Command-line interface: embed, homotopy and bench subcommands.

Exit codes: 0 success, 1 usage error, 2 numerical failure. All randomness
flows from --seed, so repeated runs write identical files (the cumulative
seconds column aside).
"""

import argparse
import sys

from . import fileio
from .affinity import AffinityGraph, sne_affinities
from .driver import (
    FIXED_ENDPOINTS,
    SAME_START,
    TIME_BUDGET_REGIME,
    HomotopySchedule,
    bench_race,
    default_init,
    homotopy_run,
)
from .errors import EmbedOptError
from .models import make_model
from .optimize import STRATEGIES, StopRule, make_strategy, minimize


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the CLI contract wants 1
    def error(self, message):
        raise UsageError(message)


def _add_input_args(p):
    p.add_argument("--data", help="data file, one point per line")
    p.add_argument("--affinities", help="precomputed affinity file")
    p.add_argument("--perplexity", type=float, default=20.0,
                   help="SNE affinity perplexity (default 20)")


def _add_model_args(p):
    p.add_argument("--model", required=True, choices=("ee", "ssne", "tsne"))
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="repulsion weight (default: 100 for ee, 1 otherwise)")
    p.add_argument("--dim", type=int, default=2, help="embedding dimension")


def _add_strategy_args(p):
    p.add_argument("--optimizer", default="sd", choices=sorted(STRATEGIES))
    p.add_argument("--knn", type=int, default=None,
                   help="sparsify the spectral-direction Laplacian to this "
                        "many neighbors (default: no sparsification)")
    p.add_argument("--lbfgs-m", type=int, default=100, help="L-BFGS memory")


def build_parser():
    parser = _Parser(prog="embedopt",
                     description="Nonlinear embedding optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    embed = sub.add_parser("embed", help="minimize one model and write the embedding")
    _add_model_args(embed)
    _add_input_args(embed)
    _add_strategy_args(embed)
    embed.add_argument("--max-iters", type=int, default=10000)
    embed.add_argument("--grad-tol", type=float, default=None,
                       help="gradient infinity-norm tolerance "
                            "(default: 1e-6 x initial)")
    embed.add_argument("--rel-tol", type=float, default=1e-8,
                       help="relative error-decrease tolerance")
    embed.add_argument("--time-budget-s", type=float, default=None)
    embed.add_argument("--seed", type=int, default=0)
    embed.add_argument("--out", help="embedding CSV output")
    embed.add_argument("--trace", help="per-iteration trace CSV output")

    homo = sub.add_parser("homotopy", help="minimize along an increasing lambda path")
    _add_model_args(homo)
    _add_input_args(homo)
    _add_strategy_args(homo)
    homo.add_argument("--lambda-min", type=float, default=1e-4)
    homo.add_argument("--lambda-max", type=float, default=1e2)
    homo.add_argument("--steps", type=int, default=50)
    homo.add_argument("--rel-tol", type=float, default=1e-6,
                      help="per-stage relative error-decrease tolerance")
    homo.add_argument("--max-iters", type=int, default=10000,
                      help="per-stage iteration cap")
    homo.add_argument("--seed", type=int, default=0)
    homo.add_argument("--out", help="final embedding CSV output")
    homo.add_argument("--stats", help="per-lambda stats CSV (default: stdout)")

    bench = sub.add_parser("bench", help="race strategies over seeded starts")
    _add_model_args(bench)
    _add_input_args(bench)
    bench.add_argument("--strategies", default="gd,fp,sd",
                       help="comma-separated strategy names")
    bench.add_argument("--seeds", type=int, default=10)
    bench.add_argument("--budget-s", type=float, default=None,
                       help="wall-clock budget per run (time-budget regime)")
    bench.add_argument("--regime",
                       choices=(SAME_START, TIME_BUDGET_REGIME, FIXED_ENDPOINTS),
                       default=None,
                       help="default: time-budget when --budget-s is given, "
                            "same-start otherwise")
    bench.add_argument("--knn", type=int, default=None)
    bench.add_argument("--lbfgs-m", type=int, default=100)
    bench.add_argument("--max-iters", type=int, default=10000)
    bench.add_argument("--out", help="bench report CSV (default: stdout)")
    return parser


def _build_affinities(args):
    if args.affinities and args.data:
        raise UsageError("pass either --data or --affinities, not both")
    if args.affinities:
        graph = fileio.read_affinities(args.affinities)
        if args.model in ("ssne", "tsne") and not graph.normalized:
            total = graph.weights.sum()
            graph = AffinityGraph(graph.dense_weights() / total, normalized=True)
        return graph
    if args.data:
        Y = fileio.read_data(args.data)
        return sne_affinities(Y, args.perplexity)
    raise UsageError("one of --data or --affinities is required")


def _build_strategy(args):
    name = args.optimizer
    if name == "sd":
        return make_strategy("sd", kappa=args.knn)
    if name == "lbfgs":
        return make_strategy("lbfgs", m=args.lbfgs_m)
    return make_strategy(name)


def _cmd_embed(args):
    graph = _build_affinities(args)
    model = make_model(args.model, graph, lam=args.lam, dim=args.dim)
    X0 = default_init(model.order, args.dim, seed=args.seed)
    stop = StopRule(grad_tol=args.grad_tol, rel_tol=args.rel_tol,
                    max_iters=args.max_iters, time_budget=args.time_budget_s)
    X, trace = minimize(X0, model, _build_strategy(args), stop=stop)
    if args.out:
        fileio.write_embedding(args.out, X)
    if args.trace:
        fileio.write_trace(args.trace, trace)
    print(f"status={trace.status} iters={trace.iterations} "
          f"error={trace.final_error!r}")
    return 0


def _cmd_homotopy(args):
    graph = _build_affinities(args)
    schedule = HomotopySchedule.log_spaced(
        args.lambda_min, args.lambda_max, args.steps,
        rel_tol=args.rel_tol, max_iters=args.max_iters,
    )
    model_at = lambda lam: make_model(args.model, graph, lam=lam, dim=args.dim)
    X0 = default_init(graph.order, args.dim, seed=args.seed)
    X, stages = homotopy_run(model_at, schedule, _build_strategy(args), X0)
    lines = ["lambda,error,iters,fevals,seconds,step_norm"]
    for s in stages:
        lines.append(f"{s.lam!r},{s.error!r},{s.iterations},{s.fevals},"
                     f"{s.seconds:.6f},{s.step_norm!r}")
    text = "\n".join(lines) + "\n"
    if args.stats:
        with open(args.stats, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.out:
        fileio.write_embedding(args.out, X)
    return 0


def _cmd_bench(args):
    graph = _build_affinities(args)
    model = make_model(args.model, graph, lam=args.lam, dim=args.dim)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    for name in strategies:
        if name not in STRATEGIES:
            raise UsageError(f"unknown strategy {name!r}")
    regime = args.regime
    if regime is None:
        regime = TIME_BUDGET_REGIME if args.budget_s is not None else SAME_START
    options = {"sd": {"kappa": args.knn}, "lbfgs": {"m": args.lbfgs_m}}
    report = bench_race(
        model, strategies, args.seeds, regime=regime, budget_s=args.budget_s,
        stop=StopRule(max_iters=args.max_iters), strategy_options=options,
    )
    text = fileio.bench_csv(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {"embed": _cmd_embed, "homotopy": _cmd_homotopy, "bench": _cmd_bench}


def run_cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except EmbedOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
