import numpy as np
import pytest

from miqpbb.bnb import solve_miqp
from miqpbb.dual import PrimalRelaxation
from miqpbb.errors import BoxTooLarge, OracleIterLimit
from miqpbb.instance import Instance
from miqpbb.oracle import brute_force_miqp, kkt_check_primal, projected_gradient_qp
from miqpbb.qp import QpProblem, qp_solve

from factories import boxed_instance, random_nonneg_qp


class TestProjectedGradient:
    def test_separable(self):
        x, v = projected_gradient_qp(QpProblem(np.eye(2), np.array([-2.0, 2.0])))
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-8)
        assert v == pytest.approx(-1.0, abs=1e-12)

    def test_nonnegative_linear_term(self):
        x, v = projected_gradient_qp(QpProblem(np.diag([1.0, 2.0]), np.array([0.5, 0.0])))
        np.testing.assert_array_equal(x, 0.0)
        assert v == 0.0

    def test_matches_active_set(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            p = random_nonneg_qp(rng)
            _, v = projected_gradient_qp(p, tol=1e-8)
            assert qp_solve(p).value == pytest.approx(v, rel=1e-5, abs=1e-5)

    def test_iteration_limit(self):
        with pytest.raises(OracleIterLimit):
            projected_gradient_qp(QpProblem(np.diag([1.0, 0.0]), np.array([0.0, -1.0])), max_iter=50)


class TestBruteForce:
    def test_one_variable(self):
        inst = Instance([[1.0]], [-3.0], 0.0, [[1.0], [-1.0]], [10.0, 5.0], 1)
        res = brute_force_miqp(inst, [(-5, 10)])
        assert res.feasible and res.value == pytest.approx(-2.0)
        assert res.assignments == 16

    def test_infeasible(self):
        inst = Instance([[1.0]], [0.0], 0.0, [[1.0], [-1.0]], [-1.0, 0.0], 1)
        assert not brute_force_miqp(inst, [(-3, 3)]).feasible

    def test_mixed_hand(self):
        inst = Instance(np.eye(2), [-3.0, -1.0], 0.0, [[1.0, 1.0], [1.0, 0.0], [-1.0, 0.0]], [10.0, 4, 4], 1)
        res = brute_force_miqp(inst, [(-4, 4)])
        assert res.value == pytest.approx(-2.25, abs=1e-8)
        assert res.x[1] == pytest.approx(0.5, abs=1e-6)

    def test_mixed_infeasible_remainder(self):
        # x2 <= -1 and x2 >= 0 whatever the integer part is
        A = [[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]]
        inst = Instance(np.eye(2), [0.0, 0.0], 0.0, A, [-1.0, 0.0, 2.0, 2.0], 1)
        assert not brute_force_miqp(inst, [(-2, 2)]).feasible

    def test_box_too_large(self):
        inst = Instance(np.eye(8), np.zeros(8), 0.0, np.zeros((0, 8)), [], 8)
        with pytest.raises(BoxTooLarge):
            brute_force_miqp(inst, [(-10, 10)] * 8)

    def test_box_length(self):
        with pytest.raises(ValueError):
            brute_force_miqp(Instance([[1.0]], [0.0], 0.0, [[1.0]], [1.0], 1), [])

    def test_agrees_with_solver(self):
        for seed in range(100):
            inst, box = boxed_instance(seed)
            ref = brute_force_miqp(inst, box)
            res = solve_miqp(inst)
            assert ref.feasible == (res.x is not None), seed
            if ref.feasible:
                assert res.value == pytest.approx(ref.value, abs=1e-6), seed


class TestKktCheck:
    def rel(self):
        return PrimalRelaxation(np.eye(2), np.zeros(2), 0.0, np.array([[1.0, 1.0]]), np.array([-1.0]))

    def test_binding_passes(self):
        rep = kkt_check_primal(self.rel(), [-0.5, -0.5], [1.0], 1e-9)
        assert rep.ok

    def test_interior(self):
        rel = PrimalRelaxation(np.eye(2), np.array([2.0, 0.0]), 0.0, np.array([[1.0, 1.0]]), np.array([5.0]))
        assert kkt_check_primal(rel, [-1.0, 0.0], [0.0], 1e-12).ok

    def test_perturbed_fails(self):
        rep = kkt_check_primal(self.rel(), [-0.5 + 1e-3, -0.5], [1.0], 1e-9)
        assert not rep.ok and rep.stationarity > 1e-9
