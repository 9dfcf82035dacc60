"""Definiteness tests for small symmetric matrices."""

import numpy as np
from scipy import linalg

SYMMETRY_TOL = 1e-10


class AsymmetryError(ValueError):
    pass


def _check_symmetric(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise AsymmetryError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > SYMMETRY_TOL * scale:
        raise AsymmetryError("matrix is not symmetric")
    return 0.5 * (S + S.T)


def min_eigenvalue(S) -> float:
    """Smallest eigenvalue of a symmetric matrix (LAPACK symmetric solver)."""
    S = _check_symmetric(S)
    return float(linalg.eigvalsh(S, subset_by_index=[0, 0], check_finite=False)[0])


def max_eigenvalue(S) -> float:
    S = _check_symmetric(S)
    n = S.shape[0]
    return float(linalg.eigvalsh(S, subset_by_index=[n - 1, n - 1], check_finite=False)[0])


def is_positive_definite(S) -> bool:
    """Cholesky test: succeeds iff ``S`` is (numerically) positive definite."""
    try:
        np.linalg.cholesky(np.asarray(S, dtype=float))
    except np.linalg.LinAlgError:
        return False
    return True


def max_eigenvalue_cholesky(S, tol: float = 1e-13) -> float:
    """Largest eigenvalue located by bisection on Cholesky definiteness tests.

    ``c * I - S`` is positive definite exactly when ``c > lambda_max(S)``; the
    Gershgorin radius brackets the search. Independent of any eigensolver.
    """
    S = _check_symmetric(S)
    radius = float(np.max(np.sum(np.abs(S), axis=1)))
    lo, hi = -radius - 1.0, radius + 1.0
    eye = np.eye(S.shape[0])
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if is_positive_definite(mid * eye - S):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
