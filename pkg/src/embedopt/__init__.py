"""embedopt: fast training of nonlinear embeddings.

Implements elastic embedding, symmetric SNE and t-SNE as one
attraction-repulsion objective family, a set of partial-Hessian descent
strategies built around the graph-Laplacian structure of their gradients
(most importantly the spectral direction with a cached sparse Cholesky
factor), a homotopy driver over the repulsion weight, and an optimizer
benchmark harness. Hot kernels run in a compiled extension when built,
with a NumPy fallback selected at import (see embedopt.backend).
"""

from . import backend
from .affinity import (
    AffinityGraph,
    GraphLaplacian,
    calibrate_perplexity,
    graph_laplacian,
    knn_sparsify,
    pairwise_sqdist,
    sne_affinities,
    symmetrize_affinities,
)
from .errors import (
    BreakdownNonPSD,
    CacheMissing,
    CalibrationFailed,
    DegenerateQ,
    DimensionMismatch,
    EmbedOptError,
    LineSearchFailed,
    NotPositiveDefinite,
    OracleScaleExceeded,
)
from .linalg import CholeskyFactor, cholesky_factorize, linear_cg, solve_via_factor
from .models import (
    GAUSSIAN,
    STUDENT_T,
    EmbeddingModel,
    Kernel,
    ModelWeights,
    attractive_laplacian,
    complete_graph,
    compute_q,
    eval_error,
    eval_gradient,
    full_hessian,
    hessian_diagonal,
    kernel_eval,
    make_model,
    model_weights,
)

__version__ = "0.1.0"
