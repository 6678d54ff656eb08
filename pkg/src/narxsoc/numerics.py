"""Dense SPD solves and the damped normal-equation step.

Matrices are plain 2-D float64 numpy arrays (row-major). The Cholesky
factorization itself is LAPACK ``potrf`` via scipy; a failed factorization
(non-positive pivot) surfaces as :class:`NotPositiveDefinite`.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite

SYMMETRY_RTOL = 1e-9


def as_dense(a) -> np.ndarray:
    """Return `a` as a finite 2-D float64 array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def cholesky_factor(A) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    The input is symmetrized as (A + Aᵀ)/2 after checking it is symmetric
    to a relative tolerance of 1e-9.
    """
    A = as_dense(A)
    n, m = A.shape
    if n != m:
        raise DimensionMismatch(f"matrix must be square, got {A.shape}")
    scale = max(np.max(np.abs(A)), 1.0) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    try:
        return scipy.linalg.cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def cholesky_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` for SPD `A`. `b` may be a vector or a matrix of columns."""
    b = np.asarray(b, dtype=float)
    A = as_dense(A)
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatch(
            f"right-hand side has {b.shape[0]} rows, matrix is {A.shape}"
        )
    L = cholesky_factor(A)
    return scipy.linalg.cho_solve((L, True), b, check_finite=False)


def solve_damped_step(J, r, mu: float) -> np.ndarray:
    """Levenberg-Marquardt step: solve (JᵀJ + μI) δ = -Jᵀr."""
    J = as_dense(J)
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.shape[0] != J.shape[0]:
        raise DimensionMismatch(f"residual shape {r.shape} does not match J {J.shape}")
    if mu < 0:
        raise ValueError("damping must be non-negative")
    return damped_step_from_normal(J.T @ J, J.T @ r, mu)


def damped_step_from_normal(JtJ: np.ndarray, Jtr: np.ndarray, mu: float) -> np.ndarray:
    """Same step as :func:`solve_damped_step` from precomputed JᵀJ and Jᵀr."""
    A = JtJ + mu * np.eye(JtJ.shape[0])
    return cholesky_solve(A, -Jtr)
