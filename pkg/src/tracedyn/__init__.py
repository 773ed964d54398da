"""Matrix trace dynamics: Grassmann-graded matrix models, generalized boosts,
canonical ensembles and stochastic state reduction."""

from .grassmann import GrassmannNumber, generator, gmul, grade, gconj
from .operator_core import (
    Grading,
    MatrixPolynomial,
    OperatorMatrix,
    PhasePoint,
    TracePolynomial,
    evaluate,
    trace_derivative,
)
from .seeding import child_rng, child_seed

__version__ = "0.1.0"

__all__ = [
    "GrassmannNumber",
    "generator",
    "gmul",
    "grade",
    "gconj",
    "Grading",
    "MatrixPolynomial",
    "OperatorMatrix",
    "PhasePoint",
    "TracePolynomial",
    "evaluate",
    "trace_derivative",
    "child_rng",
    "child_seed",
    "__version__",
]
