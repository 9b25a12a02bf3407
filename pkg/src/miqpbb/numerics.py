"""Dense symmetric linear algebra: Cholesky factors, solves, top eigenvalue."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

PIVOT_RTOL = 1e-13
POWER_MAX_ITER = 10_000
POWER_RTOL = 1e-10


@dataclass(frozen=True)
class SpdFactor:
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T == S``."""

    lower: np.ndarray

    @property
    def order(self) -> int:
        return self.lower.shape[0]


def as_sym(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {S.shape}")
    return S


def cholesky_spd(S) -> SpdFactor:
    S = as_sym(S)
    n = S.shape[0]
    if n == 0:
        return SpdFactor(np.zeros((0, 0)))
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    # numpy only rejects non-positive pivots; also reject pivots lost in roundoff
    pivots = np.diag(L) ** 2
    tol = PIVOT_RTOL * (1.0 + np.max(np.diag(S)))
    bad = np.flatnonzero(~(pivots > tol))
    if bad.size:
        raise NotPositiveDefinite(f"pivot {bad[0]} is {pivots[bad[0]]:.3e} <= {tol:.3e}")
    return SpdFactor(L)


def spd_solve(F: SpdFactor, rhs) -> np.ndarray:
    """Solve ``S x = rhs`` for a vector or a matrix of right-hand sides."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != F.order:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, factor has order {F.order}")
    if F.order == 0:
        return rhs.copy()
    z = solve_triangular(F.lower, rhs, lower=True, check_finite=False)
    return solve_triangular(F.lower, z, lower=True, trans="T", check_finite=False)


def gershgorin_upper(S) -> float:
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return 0.0
    return float(np.max(np.diag(S) + np.sum(np.abs(S), axis=1) - np.abs(np.diag(S))))


def max_eigenvalue(S) -> float:
    """Largest eigenvalue of a symmetric psd matrix by power iteration.

    Falls back to the Gershgorin bound (an overestimate) if the iteration
    does not settle within ``POWER_MAX_ITER`` steps.
    """
    S = as_sym(S)
    n = S.shape[0]
    if n == 0 or not np.any(S):
        return 0.0
    # all-ones start, nudged so it cannot be exactly orthogonal to the top eigenvector
    x = np.ones(n) + 1e-3 * np.cos(np.arange(1, n + 1))
    x /= np.linalg.norm(x)
    rho = 0.0
    for _ in range(POWER_MAX_ITER):
        y = S @ x
        rho_new = float(x @ y)
        ynorm = np.linalg.norm(y)
        if ynorm == 0.0:
            break
        resid = np.linalg.norm(y - rho_new * x)
        if resid <= 1e-8 * abs(rho_new) and abs(rho_new - rho) <= POWER_RTOL * abs(rho_new):
            return max(rho_new, 0.0)
        rho = rho_new
        x = y / ynorm
    return gershgorin_upper(S)
