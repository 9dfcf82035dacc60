"""Strict LMI feasibility: problem types and an interior-point solver."""

from .linalg import (
    AsymmetryError,
    is_positive_definite,
    max_eigenvalue,
    max_eigenvalue_cholesky,
    min_eigenvalue,
)
from .problem import (
    CompiledProblem,
    FeasibilityProblem,
    LmiBlock,
    MatrixVariable,
    ProblemError,
    Term,
    VariableKind,
)
from .solver import SdpSolution, SolverOptions, Status, solve_feasibility

__all__ = [
    "AsymmetryError",
    "CompiledProblem",
    "FeasibilityProblem",
    "LmiBlock",
    "MatrixVariable",
    "ProblemError",
    "SdpSolution",
    "SolverOptions",
    "Status",
    "Term",
    "VariableKind",
    "is_positive_definite",
    "max_eigenvalue",
    "max_eigenvalue_cholesky",
    "min_eigenvalue",
    "solve_feasibility",
]
