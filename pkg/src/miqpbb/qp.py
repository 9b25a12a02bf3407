"""Feasible active-set method for ``min x'Qx + c'x + d  s.t.  x >= 0``.

Each iteration zeroes the variables estimated active, computes a
conjugate-gradient direction in the remaining subspace, tests the
subspace Newton point for optimality and otherwise takes a projected
Armijo step.  An optional ``cutoff`` stops the solve as soon as any
feasible iterate has objective at or below it (used for early pruning of
branch-and-bound nodes, where the QP is a Lagrangian dual).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, LineSearchFailure, NonDescentDirection
from .numerics import max_eigenvalue

ZERO_GRADIENT_TOL = 1e-14
CG_RESIDUAL_RTOL = 1e-12
CURVATURE_RTOL = 1e-12
# a ray step longer than this (relative to the current point) is not worth taking
RAY_STEP_LIMIT = 1e12


class QpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    CUTOFF = "CutoffReached"
    ITER_LIMIT = "IterLimit"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class QpProblem:
    Q: np.ndarray
    c: np.ndarray
    d: float = 0.0

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if Q.ndim != 2 or Q.shape != (c.size, c.size):
            raise DimensionMismatch(f"Q has shape {Q.shape}, c has length {c.size}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", float(self.d))

    @property
    def dim(self) -> int:
        return self.c.size

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.Q @ x) + self.c @ x + self.d)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the active-set method.

    ``epsilon`` and ``eta`` default to values derived from the largest
    eigenvalue of ``Q``; call :meth:`resolve` to fill them in.
    """

    epsilon: Optional[float] = None
    delta: float = 0.5
    gamma: float = 0.1
    eta: Optional[float] = None
    tol: float = 1e-5
    cutoff: float = -math.inf
    max_iter: int = 100_000
    armijo_max_j: int = 60
    lambda_max: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2)")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.epsilon is not None and self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1 or self.armijo_max_j < 1:
            raise ValueError("max_iter and armijo_max_j must be positive")
        if self.eta is not None and self.eta <= 0.0:
            raise ValueError("eta must be positive")

    def resolve(self, problem: QpProblem) -> "SolverConfig":
        lam = self.lambda_max
        if lam is None:
            lam = max_eigenvalue(problem.Q)
        eps = self.epsilon if self.epsilon is not None else default_epsilon(lam)
        eta = self.eta if self.eta is not None else 1e-8 * (1.0 + lam)
        return replace(self, epsilon=eps, eta=eta, lambda_max=lam)


def default_epsilon(lambda_max: float) -> float:
    """90% of the largest admissible value ``1 / (2 lambda_max)``."""
    return 0.45 / lambda_max if lambda_max > 0.0 else 1.0


@dataclass(frozen=True)
class ActiveSetPartition:
    active: np.ndarray
    nonactive: np.ndarray


@dataclass
class QpResult:
    status: QpStatus
    x: np.ndarray
    value: float
    kkt_residual: float
    iterations: int
    final_partition: ActiveSetPartition
    ray: Optional[np.ndarray] = None


@dataclass
class IterationRecord:
    """Snapshot handed to the ``callback`` of :func:`qp_solve`."""

    k: int
    x: np.ndarray
    x_tilde: np.ndarray
    x_next: np.ndarray
    q_x: float
    q_tilde: float
    q_next: float
    epsilon: float
    direction: np.ndarray = field(repr=False)
    alpha: float = 0.0


@dataclass
class CgOutcome:
    direction: np.ndarray
    y_final: np.ndarray
    truncated: bool
    steps: int
    ray: Optional[np.ndarray] = None


def gradient(p: QpProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != p.c.shape:
        raise DimensionMismatch(f"x has shape {x.shape}, expected {p.c.shape}")
    return 2.0 * (p.Q @ x) + p.c


def estimate_active_set(x, g, epsilon: float) -> ActiveSetPartition:
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    nonactive = x > epsilon * g
    return ActiveSetPartition(np.flatnonzero(~nonactive), np.flatnonzero(nonactive))


def kkt_residual(p: QpProblem, x, g=None) -> float:
    """``||min(x, g(x))||_inf``; zero exactly at KKT points."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    if g is None:
        g = gradient(p, x)
    return float(np.max(np.abs(np.minimum(x, g))))


def cg_subspace(Qnn, gN, eta: float, curvature_tol: float = 0.0) -> CgOutcome:
    """Conjugate gradients on ``(2 Qnn) s = -gN`` started at ``s = 0``.

    Returns the gradient-related direction (snapshot taken at the first
    low-curvature step, or the final iterate), the final iterate as a
    displacement, whether the curvature truncation fired, the number of CG
    steps, and the zero-curvature direction that stopped the loop if any.
    """
    gN = np.asarray(gN, dtype=float)
    Qnn = np.asarray(Qnn, dtype=float)
    size = gN.size
    if size == 0 or np.max(np.abs(gN)) <= ZERO_GRADIENT_TOL:
        zero = np.zeros(size)
        return CgOutcome(zero, zero.copy(), False, 0)

    s = np.zeros(size)
    r = gN.copy()
    p = -r
    rr = float(r @ r)
    stop = CG_RESIDUAL_RTOL * (1.0 + math.sqrt(rr))
    snapshot = None
    ray = None
    steps = 0
    while steps < size + 2:
        Hp = 2.0 * (Qnn @ p)
        curv = float(p @ Hp)
        pp = float(p @ p)
        if curv <= curvature_tol * pp:
            ray = p
            break
        if snapshot is None and curv <= eta * pp:
            snapshot = -gN if steps == 0 else s.copy()
        alpha = rr / curv
        s = s + alpha * p
        r = r + alpha * Hp
        rr_new = float(r @ r)
        steps += 1
        if math.sqrt(rr_new) <= stop:
            break
        p = -r + (rr_new / rr) * p
        rr = rr_new

    truncated = snapshot is not None
    if steps == 0:
        y_final = -gN.copy()
        direction = -gN.copy()
    else:
        y_final = s
        direction = snapshot if truncated else s.copy()
    if float(direction @ gN) >= 0.0:
        # lost descent to roundoff; steepest descent is always gradient related
        direction = -gN.copy()
    return CgOutcome(direction, y_final, truncated, steps, ray)


def armijo_projected(p: QpProblem, x_tilde, d, cfg: SolverConfig, g=None):
    """Projected backtracking along ``d`` from the feasible point ``x_tilde``.

    Returns ``(alpha, x_next)`` with ``alpha = delta**j`` for the first
    ``j`` giving sufficient decrease.
    """
    x_tilde = np.asarray(x_tilde, dtype=float)
    d = np.asarray(d, dtype=float)
    if g is None:
        g = gradient(p, x_tilde)
    slope = float(g @ d)
    if not slope < 0.0:
        raise NonDescentDirection(f"g'd = {slope:.3e} is not negative")
    alpha = 1.0
    for _ in range(cfg.armijo_max_j + 1):
        x_next = np.maximum(x_tilde + alpha * d, 0.0)
        step = x_next - x_tilde
        # q(x~ + step) - q(x~), written to avoid cancelling two large values
        change = float(g @ step + step @ (p.Q @ step))
        if change <= cfg.gamma * alpha * slope:
            return alpha, x_next
        alpha *= cfg.delta
    raise LineSearchFailure(
        f"no sufficient decrease after {cfg.armijo_max_j} backtracks",
        x=x_tilde, value=p.value(x_tilde),
    )


def _follow_ray(p: QpProblem, x_tilde, g_tilde, q_tilde, ray, cfg: SolverConfig):
    """Try to certify unboundedness along a zero-curvature direction.

    The direction is clipped to the orthant first, so the ray it follows
    is always feasible from ``x_tilde``.  Returns ``(status, x, value)``,
    or ``None`` when the clipped ray is not a usable descent ray.
    """
    # clipping keeps the ray inside the orthant; its own slope and curvature decide below
    r = np.maximum(ray, 0.0)
    scale = np.max(r, initial=0.0)
    if scale == 0.0:
        return None
    r /= scale
    slope = float(g_tilde @ r)
    curv = float(r @ (p.Q @ r))
    if not slope < 0.0:
        return None
    lam = cfg.lambda_max or 0.0
    flat = curv <= CURVATURE_RTOL * (1.0 + 2.0 * lam) * float(r @ r)
    if flat:
        curv = 0.0
    limit = RAY_STEP_LIMIT * (1.0 + np.max(np.abs(x_tilde), initial=0.0))
    if math.isfinite(cfg.cutoff):
        gap = q_tilde - cfg.cutoff
        if curv > 0.0:
            reach = slope * slope / (4.0 * curv)
            if reach < gap:
                return None
            disc = max(slope * slope - 4.0 * curv * gap, 0.0)
            t = (-slope - math.sqrt(disc)) / (2.0 * curv)
        else:
            t = gap / -slope
        t = t * (1.0 + 1e-9) + 1e-12
        for _ in range(8):
            if t > limit:
                break
            x = x_tilde + t * r
            value = p.value(x)
            if value <= cfg.cutoff:
                return QpStatus.CUTOFF, x, value
            t *= 2.0
    if flat:
        return QpStatus.UNBOUNDED, x_tilde.copy(), -math.inf
    return None


def _radial_cutoff(p: QpProblem, x_tilde, g_tilde, q_tilde, cutoff: float):
    """Smallest ``s >= 1`` with ``q(s * x_tilde) <= cutoff``, or ``None``.

    ``q(s x) = a s^2 + b s + d`` with ``a = x'Qx`` and ``b = c'x``; every
    ``s * x_tilde`` is feasible, so reaching the cutoff there is a valid
    pruning certificate.  On unbounded problems the reachable decrease grows
    with ``|x|^2`` while the iterates only drift linearly.
    """
    if not math.isfinite(cutoff):
        return None
    a = 0.5 * float((g_tilde - p.c) @ x_tilde)
    b = float(p.c @ x_tilde)
    if not b < 0.0:
        return None
    gap = cutoff - p.d
    if a <= 0.0:
        s = gap / b
    else:
        disc = b * b - 4.0 * a * (-gap)
        if disc < 0.0:
            return None
        s = (-b - math.sqrt(disc)) / (2.0 * a)
    if not math.isfinite(s) or s <= 1.0:
        return None
    for _ in range(4):
        x = s * x_tilde
        value = p.value(x)
        if value <= cutoff:
            return x, value
        s *= 1.0 + 1e-9
    return None


def qp_solve(
    p: QpProblem,
    cfg: Optional[SolverConfig] = None,
    x0=None,
    callback: Optional[Callable[[IterationRecord], None]] = None,
) -> QpResult:
    """Minimise ``p`` over the non-negative orthant."""
    cfg = (cfg or SolverConfig()).resolve(p)
    m = p.dim
    x = np.zeros(m) if x0 is None else np.maximum(np.asarray(x0, dtype=float).reshape(-1), 0.0)
    if x.size != m:
        raise DimensionMismatch(f"x0 has length {x.size}, expected {m}")
    eps = cfg.epsilon
    curvature_tol = CURVATURE_RTOL * (1.0 + 2.0 * cfg.lambda_max)
    Q = p.Q

    def finish(status, x, g=None, k=0, ray=None, value=None):
        if g is None:
            g = gradient(p, x)
        return QpResult(
            status=status,
            x=x,
            value=p.value(x) if value is None else value,
            kkt_residual=kkt_residual(p, x, g),
            iterations=k,
            final_partition=estimate_active_set(x, g, eps),
            ray=ray,
        )

    qx = p.value(x)
    for k in range(cfg.max_iter):
        g = gradient(p, x)
        if qx <= cfg.cutoff:
            return finish(QpStatus.CUTOFF, x, g, k + 1)
        if kkt_residual(p, x, g) <= cfg.tol:
            return finish(QpStatus.OPTIMAL, x, g, k + 1)

        part = estimate_active_set(x, g, eps)
        N = part.nonactive
        x_tilde = x.copy()
        x_tilde[part.active] = 0.0
        g_tilde = gradient(p, x_tilde)
        q_tilde = p.value(x_tilde)
        if q_tilde <= cfg.cutoff:
            return finish(QpStatus.CUTOFF, x_tilde, g_tilde, k + 1)

        d = np.zeros(m)
        radial = _radial_cutoff(p, x_tilde, g_tilde, q_tilde, cfg.cutoff)
        if radial is not None:
            return finish(QpStatus.CUTOFF, radial[0], None, k + 1, value=radial[1])

        if N.size:
            cg = cg_subspace(Q[np.ix_(N, N)], g_tilde[N], cfg.eta, curvature_tol)
            x_bar = x_tilde.copy()
            x_bar[N] += cg.y_final
            np.maximum(x_bar, 0.0, out=x_bar)
            g_bar = gradient(p, x_bar)
            q_bar = p.value(x_bar)
            if q_bar <= cfg.cutoff:
                return finish(QpStatus.CUTOFF, x_bar, g_bar, k + 1, value=q_bar)
            if kkt_residual(p, x_bar, g_bar) <= cfg.tol:
                return finish(QpStatus.OPTIMAL, x_bar, g_bar, k + 1)
            if cg.ray is not None:
                ray = np.zeros(m)
                ray[N] = cg.ray
                hit = _follow_ray(p, x_tilde, g_tilde, q_tilde, ray, cfg)
                if hit is not None:
                    status, xr, value = hit
                    return finish(status, xr, None, k + 1, ray=ray, value=value)
            d[N] = cg.direction

        alpha = 0.0
        if np.any(d) and float(g_tilde @ d) < 0.0:
            try:
                alpha, x_next = armijo_projected(p, x_tilde, d, cfg, g_tilde)
            except LineSearchFailure as exc:
                exc.iterations = k + 1
                raise
        else:
            x_next = x_tilde
        q_next = p.value(x_next)
        if callback is not None:
            callback(IterationRecord(k, x, x_tilde, x_next, qx, q_tilde, q_next, eps, d, alpha))
        x, qx = x_next, q_next

    return finish(QpStatus.ITER_LIMIT, x, None, cfg.max_iter)
