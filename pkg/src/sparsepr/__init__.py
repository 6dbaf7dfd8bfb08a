"""Sparsity-preserving solvers for l1-regularized personalized PageRank and
nonnegative M-matrix quadratics."""

from .problem import (
    Graph,
    MQuadratic,
    OptimalityReport,
    PageRankInstance,
    build_pagerank_quadratic,
    check_optimality,
    gradient,
    internal_volume,
    negative_tolerance,
    objective,
    pagerank_upper_bounds,
    validate_m_matrix,
    volume,
)
from .solvers import (
    ConjugateBasis,
    Counters,
    Solution,
    SolverError,
    SupportState,
    apgd,
    aspr,
    cdpr,
    ista_baseline,
    pgd,
    select_pivot,
)
from .oracle import (
    GeometryReport,
    OracleError,
    OracleSolution,
    dense_solve_enumerate,
    dense_solve_projected,
    random_graph_instance,
    random_m_matrix,
    subspace_solve,
    verify_geometry,
)

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "MQuadratic",
    "OptimalityReport",
    "PageRankInstance",
    "build_pagerank_quadratic",
    "check_optimality",
    "gradient",
    "internal_volume",
    "negative_tolerance",
    "objective",
    "pagerank_upper_bounds",
    "validate_m_matrix",
    "volume",
    "ConjugateBasis",
    "Counters",
    "Solution",
    "SolverError",
    "SupportState",
    "apgd",
    "aspr",
    "cdpr",
    "ista_baseline",
    "pgd",
    "select_pivot",
    "GeometryReport",
    "OracleError",
    "OracleSolution",
    "dense_solve_enumerate",
    "dense_solve_projected",
    "random_graph_instance",
    "random_m_matrix",
    "subspace_solve",
    "verify_geometry",
    "__version__",
]
