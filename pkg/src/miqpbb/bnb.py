"""Depth-first branch-and-bound for convex MIQP with dual node bounds.

Integer variables are branched in their index order, so every quantity
that depends only on the depth (reduced Hessians, their factors, the dual
Hessians, eigenvalue bounds, the minima-line directions and the primal
recovery columns) is computed once in :func:`preprocess`.  A child node
is then built from its parent in ``O(n - depth + m)`` time by
:func:`make_child`, and each node bound comes from solving the node's
Lagrangian dual with the active-set method, warm-started at the parent's
multipliers and stopped early once the incumbent is beaten.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dual import dual_hessian, recovery_columns
from .errors import DepthExceeded, LineSearchFailure, MiqpError, PolishFailed
from .instance import Instance
from .numerics import SpdFactor, cholesky_spd, max_eigenvalue, spd_solve
from .qp import QpProblem, QpStatus, SolverConfig, default_epsilon, qp_solve

log = logging.getLogger(__name__)

DEFAULT_INITIAL_UB = 1e30
PRUNE_TOL = 1e-9
FEAS_TOL = 1e-6
POLISH_TOL = 1e-9


class MiqpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    TIME_LIMIT = "TimeLimit"


@dataclass(frozen=True)
class DepthTable:
    depth: int
    Q: np.ndarray
    factor: SpdFactor
    A: np.ndarray
    qtilde: np.ndarray
    lambda_max: float
    epsilon: float
    recovery_cols: np.ndarray
    qcol: np.ndarray
    z: Optional[np.ndarray] = None
    Az: Optional[np.ndarray] = None


@dataclass(frozen=True)
class DepthTables:
    levels: list
    n: int
    n1: int
    m: int

    def __getitem__(self, depth: int) -> DepthTable:
        return self.levels[depth]


@dataclass
class Node:
    depth: int
    fixing: tuple
    y: np.ndarray
    c_red: np.ndarray
    d_red: float
    b_red: np.ndarray
    Ay: np.ndarray
    ctilde: np.ndarray
    dtilde: float
    warm_lambda: np.ndarray


@dataclass
class Relaxation:
    bound: float
    status: QpStatus
    lam: np.ndarray
    xstar: Optional[np.ndarray]
    iterations: int
    prunable: bool


@dataclass
class LeafOutcome:
    x_cont: Optional[np.ndarray]
    value: Optional[float]
    bound: float
    prunable: bool
    iterations: int = 0
    solved_qp: bool = False


@dataclass
class PolishResult:
    x_cont: np.ndarray
    lam: np.ndarray
    violation: float
    bound: float


@dataclass
class SolveOptions:
    time_limit: Optional[float] = None
    tol: float = 1e-5
    initial_ub: float = DEFAULT_INITIAL_UB
    early_pruning: bool = True
    warmstart: bool = True
    max_iter: int = 100_000
    order: Optional[list] = None


@dataclass
class MiqpResult:
    status: MiqpStatus
    x: Optional[np.ndarray]
    value: float
    nodes: int = 0
    it_root: int = 0
    it_per_node_mean: float = 0.0
    preprocess_seconds: float = 0.0
    solve_seconds: float = 0.0
    max_constraint_violation: float = 0.0
    lower_bound: float = -math.inf
    qp_solves: int = 0
    qp_iterations: int = 0
    leaves: int = 0
    options: dict = field(default_factory=dict)


def preprocess(inst: Instance) -> DepthTables:
    n, n1 = inst.n, inst.n1
    factors = [cholesky_spd(inst.Q[l:, l:]) for l in range(n1 + 1)]
    levels = []
    for l in range(n1 + 1):
        Ql = inst.Q[l:, l:]
        Al = inst.A[:, l:]
        R = recovery_columns(factors[l], Al)
        qt = dual_hessian(Al, R)
        lam = max_eigenvalue(qt)
        z = Az = None
        if l < n1:
            # minimiser of the depth-l problem moves along z as the next variable is fixed
            w = spd_solve(factors[l + 1], Ql[1:, 0])
            z = np.concatenate(([1.0], -w))
            Az = inst.A[:, l + 1:] @ z[1:]
        levels.append(DepthTable(
            depth=l, Q=Ql, factor=factors[l], A=Al, qtilde=qt,
            lambda_max=lam, epsilon=default_epsilon(lam), recovery_cols=R,
            qcol=Ql[:, 0].copy() if n - l else np.zeros(0), z=z, Az=Az,
        ))
    return DepthTables(levels, n, n1, inst.m)


def root_node(inst: Instance, dt: DepthTables) -> Node:
    y = -0.5 * spd_solve(dt[0].factor, inst.c)
    Ay = inst.A @ y
    return Node(
        depth=0, fixing=(), y=y, c_red=inst.c.copy(), d_red=inst.d,
        b_red=inst.b.copy(), Ay=Ay, ctilde=inst.b - Ay,
        dtilde=float(-0.5 * inst.c @ y - inst.d),
        warm_lambda=np.zeros(inst.m),
    )


def make_child(parent: Node, v: int, dt: DepthTables, warm_lambda=None) -> Node:
    """Fix the next integer variable of ``parent`` to ``v``."""
    l = parent.depth
    if l >= dt.n1:
        raise DepthExceeded(f"node at depth {l} has no integer variable left to fix")
    t = dt[l]
    y0 = parent.y[0]
    alpha = v - y0
    y = parent.y[1:] + alpha * t.z[1:]
    col = t.A[:, 0]
    b_red = parent.b_red - v * col
    Ay = parent.Ay - y0 * col + alpha * t.Az
    c_red = parent.c_red[1:] + (2.0 * v) * t.qcol[1:]
    d_red = parent.d_red + parent.c_red[0] * v + t.Q[0, 0] * v * v
    return Node(
        depth=l + 1, fixing=parent.fixing + (int(v),), y=y, c_red=c_red,
        d_red=float(d_red), b_red=b_red, Ay=Ay, ctilde=b_red - Ay,
        dtilde=float(-0.5 * c_red @ y - d_red),
        warm_lambda=np.zeros(dt.m) if warm_lambda is None else warm_lambda,
    )


def rebuild_direct(inst: Instance, fixing) -> Node:
    """Node data computed from scratch; a consistency check for :func:`make_child`."""
    r = np.asarray(fixing, dtype=float)
    l = r.size
    if l > inst.n1:
        raise DepthExceeded(f"fixing of length {l} exceeds n1 = {inst.n1}")
    Ql = inst.Q[l:, l:]
    Al = inst.A[:, l:]
    c_red = inst.c[l:] + 2.0 * inst.Q[:l, l:].T @ r
    d_red = inst.d + inst.c[:l] @ r + r @ inst.Q[:l, :l] @ r
    b_red = inst.b - inst.A[:, :l] @ r
    if Ql.size:
        sol = np.linalg.solve(Ql, c_red)
    else:
        sol = np.zeros(0)
    y = -0.5 * sol
    Ay = Al @ y
    return Node(
        depth=l, fixing=tuple(int(v) for v in fixing), y=y, c_red=c_red,
        d_red=float(d_red), b_red=b_red, Ay=Ay,
        ctilde=0.5 * Al @ sol + b_red,
        dtilde=float(0.25 * c_red @ sol - d_red),
        warm_lambda=np.zeros(inst.m),
    )


class BranchSequence:
    """Integers in increasing distance from ``center``, lower side first on ties.

    ``kill(side)`` stops one side; values already handed out are unaffected.
    """

    LOWER = 0
    UPPER = 1

    def __init__(self, center: float):
        if not math.isfinite(center):
            raise ValueError(f"cannot branch around {center}")
        lo = math.floor(center)
        self.center = center
        self._next = [lo, lo + 1]
        self._alive = [True, True]
        self.last_side: Optional[int] = None

    def __iter__(self):
        return self

    def __next__(self) -> int:
        lo_ok, hi_ok = self._alive
        if not (lo_ok or hi_ok):
            raise StopIteration
        lo, hi = self._next
        if lo_ok and (not hi_ok or self.center - lo <= hi - self.center):
            side, value = self.LOWER, lo
            self._next[0] -= 1
        else:
            side, value = self.UPPER, hi
            self._next[1] += 1
        self.last_side = side
        return value

    def kill(self, side: int) -> None:
        self._alive[side] = False

    def kill_last(self) -> None:
        if self.last_side is not None:
            self.kill(self.last_side)


def branch_values(xstar_i: float) -> BranchSequence:
    return BranchSequence(xstar_i)


def _node_config(cfg: SolverConfig, table: DepthTable, cutoff: float) -> SolverConfig:
    return replace(cfg, epsilon=table.epsilon, lambda_max=table.lambda_max, cutoff=cutoff)


def solve_node_relaxation(
    node: Node, dt: DepthTables, ub: float, cfg: SolverConfig, early_pruning: bool = True,
) -> Relaxation:
    table = dt[node.depth]
    if dt.m == 0:
        bound = -node.dtilde
        return Relaxation(bound, QpStatus.OPTIMAL, np.zeros(0), node.y.copy(), 0,
                          bound >= ub - PRUNE_TOL)
    threshold = ub - PRUNE_TOL
    cutoff = -threshold if early_pruning and math.isfinite(threshold) else -math.inf
    problem = QpProblem(table.qtilde, node.ctilde, node.dtilde)
    try:
        res = qp_solve(problem, _node_config(cfg, table, cutoff), node.warm_lambda)
        status, lam, value, its = res.status, res.x, res.value, res.iterations
    except LineSearchFailure as exc:
        log.debug("line search failed at depth %d; keeping last dual iterate", node.depth)
        status, lam, value, its = QpStatus.ITER_LIMIT, exc.x, exc.value, exc.iterations
    bound = -value
    if status is QpStatus.UNBOUNDED or bound >= threshold:
        return Relaxation(bound, status, lam, None, its, True)
    xstar = node.y + table.recovery_cols @ lam
    return Relaxation(bound, status, lam, xstar, its, False)


def _polish(node: Node, table: DepthTable, lam, tol: float = POLISH_TOL) -> PolishResult:
    if table.A.shape[0] == 0:
        x = node.y.copy()
        return PolishResult(x, np.zeros(0), 0.0, -node.dtilde)
    problem = QpProblem(table.qtilde, node.ctilde, node.dtilde)
    cfg = SolverConfig(tol=tol, epsilon=table.epsilon, lambda_max=table.lambda_max)
    try:
        res = qp_solve(problem, cfg, lam)
        lam, value = res.x, res.value
    except LineSearchFailure as exc:
        lam, value = exc.x, exc.value
    x = node.y + table.recovery_cols @ lam
    violation = float(max(np.max(table.A @ x - node.b_red), 0.0))
    if violation > FEAS_TOL:
        raise PolishFailed(f"continuous part violates constraints by {violation:.3e}", violation)
    return PolishResult(x, lam, violation, -value)


def postprocess(inst: Instance, fixing, x_cont, lam, dt: Optional[DepthTables] = None) -> PolishResult:
    """Re-solve the continuous problem left by an integer fixing to high accuracy.

    A no-op when every variable is integer.
    """
    x_cont = np.asarray(x_cont, dtype=float)
    if inst.n1 == inst.n:
        return PolishResult(x_cont, np.asarray(lam, dtype=float), 0.0, math.nan)
    if len(fixing) != inst.n1:
        raise ValueError(f"fixing has length {len(fixing)}, expected {inst.n1}")
    node = rebuild_direct(inst, fixing)
    if dt is not None:
        table = dt[inst.n1]
    else:
        l = inst.n1
        F = cholesky_spd(inst.Q[l:, l:])
        R = recovery_columns(F, inst.A[:, l:])
        qt = dual_hessian(inst.A[:, l:], R)
        lm = max_eigenvalue(qt)
        table = DepthTable(l, inst.Q[l:, l:], F, inst.A[:, l:], qt, lm, default_epsilon(lm), R,
                           inst.Q[l:, l])
    return _polish(node, table, np.asarray(lam, dtype=float))


def leaf_evaluate(
    node: Node, dt: DepthTables, ub: float, cfg: SolverConfig, early_pruning: bool = True,
) -> LeafOutcome:
    """Evaluate a node whose integer variables are all fixed."""
    if node.depth != dt.n1:
        raise ValueError(f"leaf expected at depth {dt.n1}, got {node.depth}")
    if dt.n1 == dt.n:
        feasible = dt.m == 0 or float(np.min(node.b_red)) >= -FEAS_TOL
        if not feasible:
            return LeafOutcome(None, None, math.inf, True)
        return LeafOutcome(np.zeros(0), node.d_red, node.d_red, node.d_red >= ub - PRUNE_TOL)

    rel = solve_node_relaxation(node, dt, ub, cfg, early_pruning)
    if rel.prunable:
        return LeafOutcome(None, None, rel.bound, True, rel.iterations, dt.m > 0)
    table = dt[node.depth]
    try:
        pol = _polish(node, table, rel.lam)
    except PolishFailed as exc:
        log.warning("discarding leaf %s: %s", node.fixing, exc)
        return LeafOutcome(None, None, rel.bound, False, rel.iterations, dt.m > 0)
    x = pol.x_cont
    value = float(x @ (table.Q @ x) + node.c_red @ x + node.d_red)
    if abs(value - pol.bound) > 1e-6 * (1.0 + abs(value)):
        raise MiqpError(f"leaf {node.fixing}: primal {value!r} and dual {pol.bound!r} disagree")
    return LeafOutcome(x, value, pol.bound, pol.bound >= ub - PRUNE_TOL, rel.iterations, dt.m > 0)


@dataclass
class _Frame:
    node: Node
    lam: np.ndarray
    seq: BranchSequence


def solve_miqp(inst: Instance, opts: Optional[SolveOptions] = None) -> MiqpResult:
    opts = opts or SolveOptions()
    order = None
    if opts.order is not None:
        order = np.asarray(opts.order, dtype=int)
        inst = inst.permuted(order)
    n, n1, m = inst.n, inst.n1, inst.m
    cfg = SolverConfig(tol=opts.tol, max_iter=opts.max_iter)

    t0 = time.perf_counter()
    dt = preprocess(inst)
    t1 = time.perf_counter()
    deadline = math.inf if opts.time_limit is None else t1 + opts.time_limit

    ub = opts.initial_ub
    best_x = None
    nodes = leaves = qp_solves = 0
    it_root = 0
    it_rest = rest_solves = 0
    timed_out = False

    def offer(fixing, x_cont, value):
        nonlocal ub, best_x
        if value < ub:
            ub = value
            best_x = np.concatenate((np.asarray(fixing, dtype=float), x_cont))

    root = root_node(inst, dt)
    nodes += 1
    if n1 == 0:
        leaf = leaf_evaluate(root, dt, ub, cfg, opts.early_pruning)
        leaves += 1
        it_root = leaf.iterations
        qp_solves += int(leaf.solved_qp)
        if leaf.value is not None:
            offer((), leaf.x_cont, leaf.value)
        root_bound = leaf.bound
        stack = []
    else:
        rel = solve_node_relaxation(root, dt, ub, cfg, opts.early_pruning)
        it_root = rel.iterations
        qp_solves += int(m > 0)
        root_bound = rel.bound
        stack = [] if rel.prunable else [_Frame(root, rel.lam, BranchSequence(rel.xstar[0]))]

    zeros = np.zeros(m)
    while stack:
        if time.perf_counter() > deadline:
            timed_out = True
            break
        frame = stack[-1]
        v = next(frame.seq, None)
        if v is None:
            stack.pop()
            continue
        child = make_child(frame.node, v, dt, frame.lam if opts.warmstart else zeros)
        nodes += 1
        if child.depth == n1:
            leaf = leaf_evaluate(child, dt, ub, cfg, opts.early_pruning)
            leaves += 1
            if leaf.solved_qp:
                rest_solves += 1
                it_rest += leaf.iterations
            if leaf.value is not None:
                offer(child.fixing, leaf.x_cont, leaf.value)
            if leaf.bound >= ub - PRUNE_TOL:
                frame.seq.kill_last()
            continue
        rel = solve_node_relaxation(child, dt, ub, cfg, opts.early_pruning)
        if m:
            rest_solves += 1
            it_rest += rel.iterations
        if rel.prunable:
            frame.seq.kill_last()
            continue
        stack.append(_Frame(child, rel.lam, BranchSequence(rel.xstar[0])))

    t2 = time.perf_counter()
    if timed_out:
        status = MiqpStatus.TIME_LIMIT
    elif best_x is None:
        status = MiqpStatus.INFEASIBLE
    else:
        status = MiqpStatus.OPTIMAL

    x = best_x
    if x is not None and order is not None:
        x = np.empty_like(best_x)
        x[order] = best_x
    original = inst if order is None else inst.permuted(np.argsort(order))
    result = MiqpResult(
        status=status,
        x=x,
        value=original.objective(x) if x is not None else math.inf,
        nodes=nodes,
        it_root=it_root,
        it_per_node_mean=it_rest / rest_solves if rest_solves else 0.0,
        preprocess_seconds=t1 - t0,
        solve_seconds=t2 - t1,
        max_constraint_violation=original.violation(x) if x is not None else 0.0,
        lower_bound=min(root_bound, ub) if x is not None else root_bound,
        qp_solves=qp_solves + rest_solves,
        qp_iterations=it_root + it_rest,
        leaves=leaves,
        options={
            "tol": opts.tol, "time_limit": opts.time_limit, "initial_ub": opts.initial_ub,
            "early_pruning": opts.early_pruning, "warmstart": opts.warmstart,
        },
    )
    if status is MiqpStatus.OPTIMAL:
        result.lower_bound = result.value
    return result
