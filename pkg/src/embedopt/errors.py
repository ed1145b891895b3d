"""Exception types raised by the embedding toolkit."""


class EmbedOptError(Exception):
    """Base class for all toolkit errors."""


class NotPositiveDefinite(EmbedOptError):
    """A Cholesky pivot came out nonpositive: the damping is too small or the
    matrix is not positive semidefinite."""


class DimensionMismatch(EmbedOptError, ValueError):
    """Operands have incompatible shapes."""


class BreakdownNonPSD(EmbedOptError):
    """Linear CG met a direction of nonpositive curvature: the operator is not
    positive semidefinite."""


class CalibrationFailed(EmbedOptError):
    """Perplexity bisection could not bracket the entropy target (degenerate
    distances or an infeasible perplexity)."""


class DegenerateQ(EmbedOptError):
    """The kernel normalizer underflowed to zero, so the pairwise distribution
    over the embedding is undefined."""


class OracleScaleExceeded(EmbedOptError):
    """The dense full-Hessian reference was requested above its size cap."""


class CacheMissing(EmbedOptError):
    """A direction strategy was used before its one-time preparation step."""


class LineSearchFailed(EmbedOptError):
    """Backtracking exhausted its tries without sufficient decrease."""
