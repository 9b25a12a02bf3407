import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from miqpbb.bnb import (
    BranchSequence,
    MiqpStatus,
    SolveOptions,
    branch_values,
    leaf_evaluate,
    make_child,
    postprocess,
    preprocess,
    rebuild_direct,
    root_node,
    solve_miqp,
    solve_node_relaxation,
)
from miqpbb.errors import DepthExceeded, NotPositiveDefinite
from miqpbb.instance import Instance
from miqpbb.instance_io import GenSpec, generate
from miqpbb.oracle import brute_force_miqp
from miqpbb.qp import QpStatus, SolverConfig

from factories import boxed_instance

NODE_FIELDS = ("y", "c_red", "d_red", "b_red", "Ay", "ctilde", "dtilde")


def toy_n1():
    return Instance([[1.0]], [-3.0], 0.0, [[1.0]], [10.0], 1)


def toy_mixed():
    return Instance(np.eye(2), [-3.0, -1.0], 0.0, [[1.0, 1.0]], [10.0], 1)


def binding_instance(n1=0):
    return Instance(np.eye(2), [0.0, 0.0], 0.0, [[1.0, 1.0]], [-1.0], n1)


def assert_nodes_close(a, b, rtol=1e-9):
    assert a.depth == b.depth and a.fixing == b.fixing
    for name in NODE_FIELDS:
        x, y = np.atleast_1d(getattr(a, name)), np.atleast_1d(getattr(b, name))
        scale = 1.0 + max(np.max(np.abs(y), initial=0.0), np.max(np.abs(x), initial=0.0))
        np.testing.assert_allclose(x, y, rtol=0, atol=rtol * scale, err_msg=name)


class TestPreprocess:
    def test_identity_direction(self):
        dt = preprocess(Instance(np.eye(2), [0.0, 0.0], 0.0, np.zeros((0, 2)), [], 1))
        np.testing.assert_allclose(dt[0].z, [1.0, 0.0])

    def test_coupled_direction(self):
        Q = np.array([[1.0, 0.5], [0.5, 1.0]])
        c = np.array([0.3, -0.7])
        inst = Instance(Q, c, 0.0, np.zeros((0, 2)), [], 1)
        dt = preprocess(inst)
        np.testing.assert_allclose(dt[0].z, [1.0, -0.5])
        y = root_node(inst, dt).y
        for t in (0.0, 1.0, 2.0):
            direct = np.linalg.solve(Q[1:, 1:], -(c[1:] + 2 * Q[1:, 0] * t)) / 2
            np.testing.assert_allclose((y + (t - y[0]) * dt[0].z)[1:], direct, rtol=1e-12)

    def test_dual_tables(self):
        dt = preprocess(Instance(np.eye(2), [0.0, 0.0], 0.0, [[1.0, 1.0]], [1.0], 1))
        np.testing.assert_allclose(dt[0].qtilde, [[0.5]])
        assert dt[0].lambda_max == pytest.approx(0.5)
        assert dt[0].epsilon == pytest.approx(0.9)

    def test_not_definite(self):
        with pytest.raises(NotPositiveDefinite):
            preprocess(Instance(np.diag([1.0, 0.0]), [0.0, 0.0], 0.0, np.zeros((0, 2)), [], 1))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_minima_line(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 10))
        inst = generate(GenSpec(n, n, 2, "a", seed, min_eig=0.05))
        dt = preprocess(inst)
        for l in range(n - 1):
            fixing = list(rng.integers(-3, 4, l))
            node = rebuild_direct(inst, fixing)
            t = float(rng.integers(-3, 4))
            child = rebuild_direct(inst, fixing + [t])
            moved = (node.y + (t - node.y[0]) * dt[l].z)[1:]
            np.testing.assert_allclose(moved, child.y, rtol=1e-9, atol=1e-9 * (1 + np.abs(child.y).max()))


class TestNodes:
    def test_root_zero_linear(self):
        inst = Instance(np.eye(2), [0.0, 0.0], 1.5, np.zeros((0, 2)), [], 2)
        node = root_node(inst, preprocess(inst))
        np.testing.assert_array_equal(node.y, 0.0)
        assert node.dtilde == -1.5

    def test_root_hand(self):
        inst = Instance(np.eye(2), [-2.0, 2.0], 0.0, np.zeros((0, 2)), [], 2)
        node = root_node(inst, preprocess(inst))
        np.testing.assert_allclose(node.y, [1.0, -1.0])
        assert node.dtilde == pytest.approx(2.0)

    def test_child_hand(self):
        inst = Instance(np.eye(2), [0.0, 0.0], 0.0, [[1.0, 1.0]], [1.0], 1)
        dt = preprocess(inst)
        child = make_child(root_node(inst, dt), 1, dt)
        np.testing.assert_allclose(child.y, [0.0], atol=1e-15)
        np.testing.assert_allclose(child.c_red, [0.0])
        assert child.d_red == 1.0
        np.testing.assert_allclose(child.b_red, [0.0])
        np.testing.assert_allclose(child.ctilde, [0.0], atol=1e-15)
        assert child.dtilde == pytest.approx(-1.0)
        assert_nodes_close(child, rebuild_direct(inst, [1]))

    def test_child_at_base_point(self):
        Q = np.array([[2.0, 0.5, 0.1], [0.5, 1.0, 0.2], [0.1, 0.2, 1.5]])
        inst = Instance(Q, [-4.0, 1.0, 0.5], 0.0, np.zeros((0, 3)), [], 2)
        dt = preprocess(inst)
        root = root_node(inst, dt)
        # shift c so the root minimiser has an integral first coordinate
        c = inst.c + 2 * Q[:, 0] * (root.y[0] - round(root.y[0]))
        inst = Instance(Q, c, 0.0, np.zeros((0, 3)), [], 2)
        root = root_node(inst, dt)
        child = make_child(root, int(round(root.y[0])), dt)
        np.testing.assert_allclose(child.y, root.y[1:], rtol=1e-12)

    def test_empty_fixing_is_root(self):
        inst = generate(GenSpec(5, 3, 2, "a", 1))
        assert_nodes_close(rebuild_direct(inst, []), root_node(inst, preprocess(inst)))

    def test_depth_exceeded(self):
        inst = toy_n1()
        dt = preprocess(inst)
        child = make_child(root_node(inst, dt), 1, dt)
        with pytest.raises(DepthExceeded):
            make_child(child, 1, dt)
        with pytest.raises(DepthExceeded):
            rebuild_direct(inst, [1, 2])

    def test_warm_lambda_passed_on(self):
        inst = toy_n1()
        dt = preprocess(inst)
        child = make_child(root_node(inst, dt), 1, dt, np.array([0.25]))
        np.testing.assert_array_equal(child.warm_lambda, [0.25])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_incremental_matches_direct(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 16))
        n1 = int(rng.integers(1, n + 1))
        inst = generate(GenSpec(n, n1, int(rng.integers(0, 6)), "ab"[seed % 2], seed))
        dt = preprocess(inst)
        node = root_node(inst, dt)
        fixing = []
        for _ in range(int(rng.integers(1, n1 + 1))):
            v = int(rng.integers(-5, 6))
            fixing.append(v)
            node = make_child(node, v, dt)
            assert_nodes_close(node, rebuild_direct(inst, fixing))

    def test_node_invariants(self):
        inst = generate(GenSpec(8, 6, 3, "a", 4))
        dt = preprocess(inst)
        node = make_child(make_child(root_node(inst, dt), 2, dt), -1, dt)
        t = dt[node.depth]
        np.testing.assert_allclose(node.y, -0.5 * np.linalg.solve(t.Q, node.c_red), rtol=1e-9)
        np.testing.assert_allclose(node.ctilde, node.b_red - t.A @ node.y, atol=1e-12)
        assert node.dtilde == pytest.approx(-0.5 * node.c_red @ node.y - node.d_red, rel=1e-12)


class TestBranchValues:
    @pytest.mark.parametrize("x, expected", [
        (1.5, [1, 2, 0, 3, -1, 4]),
        (2.3, [2, 3, 1, 4, 0]),
        (2.0, [2, 1, 3, 0, 4]),
        (-0.7, [-1, 0, -2, 1, -3]),
    ])
    def test_order(self, x, expected):
        assert list(itertools.islice(branch_values(x), len(expected))) == expected

    def test_kill_one_side(self):
        seq = BranchSequence(1.5)
        assert next(seq) == 1
        seq.kill(BranchSequence.LOWER)
        assert list(itertools.islice(seq, 3)) == [2, 3, 4]

    def test_kill_both_sides(self):
        seq = BranchSequence(0.2)
        next(seq)
        seq.kill_last()
        next(seq)
        seq.kill_last()
        assert list(seq) == []

    def test_non_finite(self):
        with pytest.raises(ValueError):
            BranchSequence(math.nan)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-1e3, 1e3))
    def test_increasing_distance(self, x):
        vals = list(itertools.islice(branch_values(x), 12))
        dist = [abs(v - x) for v in vals]
        assert all(a <= b + 1e-12 for a, b in zip(dist, dist[1:]))
        assert len(set(vals)) == len(vals)


class TestRelaxation:
    def test_unconstrained(self):
        inst = Instance(np.eye(2), [-2.0, 2.0], 0.0, np.zeros((0, 2)), [], 1)
        dt = preprocess(inst)
        node = root_node(inst, dt)
        rel = solve_node_relaxation(node, dt, math.inf, SolverConfig())
        assert rel.bound == -node.dtilde
        np.testing.assert_array_equal(rel.xstar, node.y)

    def test_binding(self):
        inst = binding_instance(1)
        dt = preprocess(inst)
        rel = solve_node_relaxation(root_node(inst, dt), dt, math.inf, SolverConfig(tol=1e-10))
        assert rel.status is QpStatus.OPTIMAL
        np.testing.assert_allclose(rel.lam, [1.0], atol=1e-9)
        assert rel.bound == pytest.approx(0.5)
        np.testing.assert_allclose(rel.xstar, [-0.5, -0.5], atol=1e-9)

    def test_cutoff(self):
        inst = binding_instance(1)
        dt = preprocess(inst)
        rel = solve_node_relaxation(root_node(inst, dt), dt, 0.4, SolverConfig())
        assert rel.status is QpStatus.CUTOFF and rel.prunable
        assert rel.bound >= 0.4 and rel.xstar is None

    def test_infeasible_is_prunable_without_cutoff(self):
        inst = Instance([[1.0]], [0.0], 0.0, [[1.0], [-1.0]], [-1.0, 0.0], 1)
        dt = preprocess(inst)
        for early in (True, False):
            rel = solve_node_relaxation(root_node(inst, dt), dt, 1e30, SolverConfig(), early)
            assert rel.prunable


class TestLeaves:
    def test_pure_feasible(self):
        inst = Instance(np.eye(2), [0.0, 0.0], 0.0, [[1.0, 0.0], [0.0, 1.0]], [1.2, 1.0], 2)
        dt = preprocess(inst)
        leaf = make_child(make_child(root_node(inst, dt), 1, dt), 1, dt)
        np.testing.assert_allclose(leaf.b_red, [0.2, 0.0])
        out = leaf_evaluate(leaf, dt, math.inf, SolverConfig())
        assert out.value == leaf.d_red == 2.0

    def test_pure_infeasible(self):
        inst = Instance([[1.0]], [0.0], 0.0, [[1.0]], [0.5], 1)
        dt = preprocess(inst)
        out = leaf_evaluate(make_child(root_node(inst, dt), 1, dt), dt, math.inf, SolverConfig())
        assert out.value is None and out.prunable

    def test_mixed(self):
        inst = toy_mixed()
        dt = preprocess(inst)
        out = leaf_evaluate(make_child(root_node(inst, dt), 1, dt), dt, math.inf, SolverConfig())
        np.testing.assert_allclose(out.x_cont, [0.5])
        assert out.value == pytest.approx(-2.25)

    def test_wrong_depth(self):
        inst = toy_mixed()
        dt = preprocess(inst)
        with pytest.raises(ValueError):
            leaf_evaluate(root_node(inst, dt), dt, math.inf, SolverConfig())


class TestPostprocess:
    def test_binding_example(self):
        inst = binding_instance(0)
        pol = postprocess(inst, [], np.zeros(2), np.zeros(1))
        np.testing.assert_allclose(pol.x_cont, [-0.5, -0.5], atol=1e-9)
        assert pol.violation <= 1e-9

    def test_idempotent(self):
        inst = toy_mixed()
        first = postprocess(inst, [1], np.zeros(1), np.zeros(1))
        again = postprocess(inst, [1], first.x_cont, first.lam)
        np.testing.assert_allclose(again.x_cont, first.x_cont, atol=1e-9)

    def test_pure_integer_noop(self):
        inst = toy_n1()
        x = np.array([])
        pol = postprocess(inst, [2], x, np.array([0.3]))
        assert pol.x_cont is not None and pol.x_cont.size == 0
        np.testing.assert_array_equal(pol.lam, [0.3])


class TestSolveMiqp:
    def test_one_variable(self):
        res = solve_miqp(toy_n1())
        assert res.status is MiqpStatus.OPTIMAL
        assert res.value == pytest.approx(-2.0)
        assert res.x[0] in (1.0, 2.0)

    def test_infeasible(self):
        res = solve_miqp(Instance([[1.0]], [0.0], 0.0, [[1.0], [-1.0]], [-1.0, 0.0], 1))
        assert res.status is MiqpStatus.INFEASIBLE and res.x is None

    def test_mixed(self):
        res = solve_miqp(toy_mixed())
        assert res.value == pytest.approx(-2.25)
        assert res.x[0] in (1.0, 2.0)

    def test_continuous_only(self):
        res = solve_miqp(binding_instance(0))
        assert res.value == pytest.approx(0.5)

    def test_unconstrained_integer(self):
        Q = np.array([[1.0, 0.3], [0.3, 0.5]])
        c = np.array([-2.2, 0.9])
        res = solve_miqp(Instance(Q, c, 0.0, np.zeros((0, 2)), [], 2))
        grid = [(a, b) for a in range(-10, 11) for b in range(-10, 11)]
        best = min(np.array(g) @ Q @ np.array(g) + c @ np.array(g) for g in grid)
        assert res.value == pytest.approx(best)

    def test_initial_ub_below_optimum(self):
        res = solve_miqp(toy_n1(), SolveOptions(initial_ub=-5.0))
        assert res.status is MiqpStatus.INFEASIBLE

    def test_time_limit(self):
        inst = generate(GenSpec(30, 30, 5, "a", 3))
        res = solve_miqp(inst, SolveOptions(time_limit=1e-6))
        assert res.status is MiqpStatus.TIME_LIMIT
        assert math.isfinite(res.lower_bound)

    def test_order_option(self):
        inst = generate(GenSpec(6, 4, 2, "b", 8))
        base = solve_miqp(inst)
        perm = solve_miqp(inst, SolveOptions(order=[3, 1, 0, 2, 4, 5]))
        assert perm.value == pytest.approx(base.value, abs=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_matches_brute_force(self, seed):
        inst, box = boxed_instance(seed)
        res = solve_miqp(inst)
        ref = brute_force_miqp(inst, box)
        assert (res.status is MiqpStatus.INFEASIBLE) == (not ref.feasible)
        if ref.feasible:
            assert res.value == pytest.approx(ref.value, abs=1e-6)
            self.check_incumbent(inst, res)

    @staticmethod
    def check_incumbent(inst, res):
        np.testing.assert_array_equal(res.x[: inst.n1], np.round(res.x[: inst.n1]))
        assert inst.violation(res.x) <= 1e-6
        assert abs(res.value - inst.objective(res.x)) <= 1e-8 * (1 + abs(res.value))

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10**6))
    def test_warmstart_soundness(self, seed):
        inst = generate(GenSpec(10, 10, 3, "ab"[seed % 2], seed))
        warm = solve_miqp(inst)
        cold = solve_miqp(inst, SolveOptions(warmstart=False))
        assert warm.status == cold.status
        assert warm.value == pytest.approx(cold.value, abs=1e-8)

    def test_statistics(self):
        res = solve_miqp(generate(GenSpec(8, 8, 2, "a", 1)))
        assert res.nodes >= 1 and res.it_root >= 1
        assert res.preprocess_seconds >= 0 and res.solve_seconds >= 0
        self.check_incumbent(generate(GenSpec(8, 8, 2, "a", 1)), res)
