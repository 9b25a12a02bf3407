"""Slow reference solvers for tests and acceptance checks.

Nothing here reuses the active-set solver or the branch-and-bound code;
only the eigenvalue estimate from :mod:`numerics` is shared.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import BoxTooLarge, OracleIterLimit
from .numerics import max_eigenvalue

FEAS_TOL = 1e-6
MAX_ASSIGNMENTS = 10**7


def projected_gradient_qp(p, tol: float = 1e-9, max_iter: int = 1_000_000, x0=None):
    """Fixed-step projected gradient on ``min x'Qx + c'x + d, x >= 0``.

    Returns ``(x, value)``.
    """
    Q = np.asarray(p.Q, dtype=float)
    c = np.asarray(p.c, dtype=float)
    d = float(getattr(p, "d", 0.0))
    step = 1.0 / (2.0 * max_eigenvalue(Q) + 1e-8)
    x = np.zeros(c.size) if x0 is None else np.maximum(np.asarray(x0, dtype=float), 0.0)
    for _ in range(max_iter):
        g = 2.0 * Q @ x + c
        if x.size == 0 or np.max(np.abs(np.minimum(x, g))) <= tol:
            return x, float(x @ Q @ x + c @ x + d)
        x = np.maximum(x - step * g, 0.0)
    raise OracleIterLimit(f"projected gradient did not reach tol {tol} in {max_iter} steps")


def _pg_batch(Qt, C, tol, max_iter):
    """Projected gradient for many linear terms sharing one Hessian (rows of ``C``)."""
    step = 1.0 / (2.0 * max_eigenvalue(Qt) + 1e-8)
    L = np.zeros_like(C)
    for _ in range(max_iter):
        G = 2.0 * L @ Qt + C
        if np.max(np.abs(np.minimum(L, G)), initial=0.0) <= tol:
            return L
        L = np.maximum(L - step * G, 0.0)
    raise OracleIterLimit(f"batched projected gradient did not reach tol {tol}")


@dataclass
class BruteForceResult:
    feasible: bool
    x: np.ndarray | None
    value: float
    assignments: int


def _assignments(box):
    ranges = [np.arange(int(lo), int(hi) + 1) for lo, hi in box]
    total = math.prod(len(r) for r in ranges)
    if total > MAX_ASSIGNMENTS:
        raise BoxTooLarge(f"{total} integer assignments exceed {MAX_ASSIGNMENTS}")
    if not ranges:
        return np.zeros((1, 0)), 1
    grid = np.array(list(itertools.product(*ranges)), dtype=float)
    return grid.reshape(-1, len(ranges)), total


def brute_force_miqp(inst, box, tol: float = 1e-10) -> BruteForceResult:
    """Enumerate every integer assignment inside ``box`` (one ``(lo, hi)`` per integer variable).

    Mixed instances solve each continuous remainder through its dual by
    projected gradient; feasibility of a remainder is decided by an LP.
    """
    n, n1 = inst.n, inst.n1
    if len(box) != n1:
        raise ValueError(f"box has {len(box)} ranges, expected {n1}")
    R, total = _assignments(box)
    Q, c, A, b = inst.Q, inst.c, inst.A, inst.b

    if n1 == n:
        vals = np.einsum("ki,ij,kj->k", R, Q, R) + R @ c + inst.d
        ok = np.all(R @ A.T <= b + FEAS_TOL, axis=1) if inst.m else np.ones(len(R), bool)
        if not ok.any():
            return BruteForceResult(False, None, math.inf, total)
        idx = np.flatnonzero(ok)[np.argmin(vals[ok])]
        return BruteForceResult(True, R[idx].copy(), float(vals[idx]), total)

    QII, QIC, QCC = Q[:n1, :n1], Q[:n1, n1:], Q[n1:, n1:]
    AI, AC = A[:, :n1], A[:, n1:]
    c_red = c[n1:] + 2.0 * R @ QIC
    d_red = inst.d + R @ c[:n1] + np.einsum("ki,ij,kj->k", R, QII, R)
    b_red = b - R @ AI.T

    const = np.all(AC == 0.0, axis=1)
    ok = np.all(b_red[:, const] >= -FEAS_TOL, axis=1)
    rows = np.flatnonzero(~const)
    Ak = AC[rows]
    bk = b_red[:, rows]

    if rows.size:
        for k in np.flatnonzero(ok):
            lp = linprog(np.zeros(n - n1), A_ub=Ak, b_ub=bk[k], bounds=[(None, None)] * (n - n1),
                         method="highs")
            ok[k] = lp.status == 0
    if not ok.any():
        return BruteForceResult(False, None, math.inf, total)

    keep = np.flatnonzero(ok)
    Qinv_c = np.linalg.solve(QCC, c_red[keep].T).T
    if rows.size:
        Qinv_At = np.linalg.solve(QCC, Ak.T)
        Qt = 0.25 * Ak @ Qinv_At
        Qt = 0.5 * (Qt + Qt.T)
        C = 0.5 * Qinv_c @ Ak.T + bk[keep]
        Lam = _pg_batch(Qt, C, tol, 2_000_000)
        X = -0.5 * (Qinv_c + Lam @ Qinv_At.T)
    else:
        X = -0.5 * Qinv_c
    vals = np.einsum("ki,ij,kj->k", X, QCC, X) + np.einsum("ki,ki->k", X, c_red[keep]) + d_red[keep]
    best = int(np.argmin(vals))
    x = np.concatenate((R[keep[best]], X[best]))
    return BruteForceResult(True, x, float(inst.objective(x)), total)


@dataclass
class KktReport:
    ok: bool
    stationarity: float
    feasibility: float
    complementarity: float


def kkt_check_primal(rel, x, lam, tol: float) -> KktReport:
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    stat = float(np.max(np.abs(2.0 * rel.Q @ x + rel.c + rel.A.T @ lam), initial=0.0))
    slack = rel.A @ x - rel.b
    feas = float(max(np.max(slack, initial=0.0), 0.0))
    comp = float(np.max(np.abs(lam * slack), initial=0.0))
    ok = stat <= tol and feas <= tol and comp <= tol and bool(np.all(lam >= 0))
    return KktReport(ok, stat, feas, comp)
