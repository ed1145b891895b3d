"""Readers and writers for the package's text formats.

* data file: one point per line, D whitespace- or comma-separated
  decimals; N is the line count;
* affinity file: header ``N <int> normalized <0|1>``, then triples
  ``n m w`` with 0-based indices, upper triangle (n < m) only;
* embedding CSV: N rows, d comma-separated columns;
* trace CSV: ``iter,error,grad_inf_norm,step,fevals,cum_seconds`` plus a
  final ``# status=...`` comment line;
* bench CSV: ``seed,strategy,final_error,iters,fevals,seconds,status``.

Floats are written with repr, which round-trips bit-exactly through the
readers.
"""

import numpy as np

from .affinity import AffinityGraph


def read_data(path):
    """Load a data file into a (D, N) column-per-point array."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(tok) for tok in line.replace(",", " ").split()])
    if not rows:
        raise ValueError(f"{path}: no data points")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: inconsistent point dimensions {sorted(widths)}")
    return np.asarray(rows, dtype=np.float64).T


def write_data(path, Y):
    """Write a (D, N) data matrix, one point per line."""
    Y = np.asarray(Y, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for n in range(Y.shape[1]):
            fh.write(" ".join(repr(float(v)) for v in Y[:, n]) + "\n")


def read_affinities(path):
    """Load an affinity file into an AffinityGraph."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "N" or header[2] != "normalized":
            raise ValueError(f"{path}: bad header {' '.join(header)!r}")
        n = int(header[1])
        normalized = bool(int(header[3]))
        W = np.zeros((n, n))
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, b, w = line.split()
            a, b = int(a), int(b)
            if not 0 <= a < b < n:
                raise ValueError(f"{path}: entry ({a}, {b}) is not upper-triangle")
            W[a, b] = W[b, a] = float(w)
    return AffinityGraph(W, normalized=normalized)


def write_affinities(path, graph):
    """Write an AffinityGraph in the triple format (nonzero upper entries)."""
    W = graph.dense_weights()
    n = graph.order
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"N {n} normalized {int(graph.normalized)}\n")
        for a in range(n):
            for b in range(a + 1, n):
                if W[a, b] != 0.0:
                    fh.write(f"{a} {b} {repr(float(W[a, b]))}\n")


def write_embedding(path, X):
    """Write a (d, N) embedding as CSV: N rows, d full-precision columns."""
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for n in range(X.shape[1]):
            fh.write(",".join(repr(float(v)) for v in X[:, n]) + "\n")


def read_embedding(path):
    return read_data(path)  # same shape conventions


def write_trace(path, trace):
    """Write an optimization trace CSV plus its terminal status comment."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iter,error,grad_inf_norm,step,fevals,cum_seconds\n")
        for r in trace.records:
            fh.write(
                f"{r.iteration},{repr(float(r.error))},{repr(float(r.grad_inf))},"
                f"{repr(float(r.step))},{r.fevals},{r.seconds:.6f}\n"
            )
        fh.write(f"# status={trace.status}\n")


def write_bench(path, report):
    """Write a benchmark report CSV, one row per (seed, strategy) cell."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(bench_csv(report))


def bench_csv(report):
    lines = ["seed,strategy,final_error,iters,fevals,seconds,status"]
    for r in report.rows:
        lines.append(
            f"{r.seed},{r.strategy},{repr(float(r.final_error))},{r.iterations},"
            f"{r.fevals},{r.seconds:.6f},{r.status}"
        )
    return "\n".join(lines) + "\n"
