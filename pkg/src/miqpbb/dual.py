"""Lagrangian dual of ``min x'Qx + c'x + d  s.t.  Ax <= b`` for positive definite Q.

For multipliers ``lam >= 0`` the Lagrangian is minimised at
``x(lam) = -1/2 Q^-1 (c + A' lam)``, which gives the dual

    max  -(lam' Qt lam + ct' lam + dt)   s.t.  lam >= 0

with ``Qt = 1/4 A Q^-1 A'``, ``ct = 1/2 A Q^-1 c + b`` and
``dt = 1/4 c' Q^-1 c - d``.  The dual gradient ``2 Qt lam + ct`` equals the
primal slack ``b - A x(lam)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .numerics import SpdFactor, cholesky_spd, spd_solve
from .qp import QpProblem


@dataclass(frozen=True)
class PrimalRelaxation:
    Q: np.ndarray
    c: np.ndarray
    d: float
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        b = np.asarray(self.b, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(b.size, n)
        if Q.shape != (n, n) or A.shape != (b.size, n):
            raise DimensionMismatch(f"Q {Q.shape}, c {c.shape}, A {A.shape}, b {b.shape}")
        for name, val in (("Q", Q), ("c", c), ("A", A), ("b", b)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "d", float(self.d))

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.Q @ x) + self.c @ x + self.d)

    def lagrangian(self, x, lam) -> float:
        return self.objective(x) + float(np.asarray(lam) @ (self.A @ x - self.b))


@dataclass(frozen=True)
class DualData:
    qtilde: np.ndarray
    ctilde: np.ndarray
    dtilde: float
    recovery_cols: np.ndarray
    """``n x m`` matrix whose column ``i`` is ``-1/2 Q^-1 a_i``."""
    y_unc: np.ndarray

    def problem(self) -> QpProblem:
        return QpProblem(self.qtilde, self.ctilde, self.dtilde)


def recovery_columns(F: SpdFactor, A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape[0] == 0:
        return np.zeros((F.order, 0))
    return -0.5 * spd_solve(F, A.T)


def dual_hessian(A, recovery_cols) -> np.ndarray:
    """``1/4 A Q^-1 A'`` from precomputed recovery columns, symmetrised."""
    Qt = -0.5 * (np.asarray(A, dtype=float) @ recovery_cols)
    return 0.5 * (Qt + Qt.T)


def build_dual(rel: PrimalRelaxation, factor: SpdFactor | None = None) -> DualData:
    F = factor if factor is not None else cholesky_spd(rel.Q)
    R = recovery_columns(F, rel.A)
    y = -0.5 * spd_solve(F, rel.c)
    return DualData(
        qtilde=dual_hessian(rel.A, R),
        ctilde=rel.b - rel.A @ y,
        dtilde=float(-0.5 * rel.c @ y - rel.d),
        recovery_cols=R,
        y_unc=y,
    )


def dual_bound(dd: DualData, lam) -> float:
    lam = np.asarray(lam, dtype=float)
    return -float(lam @ (dd.qtilde @ lam) + dd.ctilde @ lam + dd.dtilde)


def recover_primal(dd: DualData, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return dd.y_unc + dd.recovery_cols @ lam
