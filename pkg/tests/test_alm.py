import numpy as np
import pytest

from qpas.alm import AlmConfig, AlmWorkspace, alm_solve
from qpas.oracle import make_known_scqp
from qpas.problem import StronglyConvexQP, check_scqp_kkt


def test_multiplier_fixed_point_when_first_iterate_feasible():
    # crafted so the first subproblem solution is exactly feasible:
    # with beta=1, H=[[2,1],[1,2]], f=(-3,-3), the minimizer (1,1) has A x = 2 = b
    qp = StronglyConvexQP(np.eye(2), np.array([[1.0, 1.0]]),
                          np.array([-1.0, -1.0]), np.array([2.0]))
    lam0 = np.array([0.0])
    x, lam, trace = alm_solve(qp, np.zeros(2), lam0, AlmConfig(beta=1.0))
    assert np.allclose(x, [1.0, 1.0])
    assert lam == pytest.approx(lam0)
    assert trace.eq_violation[0] <= 1e-14


def test_symmetric_instance_converges():
    qp = StronglyConvexQP(np.eye(2), np.array([[1.0, 1.0]]), np.zeros(2),
                          np.array([1.0]))
    x, lam, trace = alm_solve(qp, np.zeros(2), np.zeros(1), AlmConfig(beta=10.0))
    assert np.abs(x - 0.5).max() <= 1e-9
    assert trace.eq_violation[-1] <= 1e-10
    assert trace.outer_iterations <= 30
    assert trace.status == "optimal"


def test_known_solution_recovery():
    inst = make_known_scqp(20, 60, seed=7, density=0.5)
    x, lam, trace = alm_solve(inst.problem, np.zeros(60), np.zeros(20))
    assert np.abs(x - inst.x_star).max() <= 1e-8
    assert trace.final_kkt.stationarity_residual <= 1e-7


def test_subproblems_solved_exactly():
    from qpas.problem import BoxQP, check_box_kkt

    inst = make_known_scqp(8, 24, seed=3, density=0.6)
    ws = AlmWorkspace(inst.problem, AlmConfig())
    lam = np.zeros(8)
    x = np.zeros(24)
    for _ in range(4):
        x, _, state = ws.solve_subproblem(inst.problem.r, lam, x)
        f = inst.problem.r - inst.problem.A.T @ lam - ws.beta * ws.Atb
        rep = check_box_kkt(BoxQP(ws.H, f, validate=False), x)
        assert rep.stationarity_residual <= 1e-9 * (1 + np.abs(f).max())
        lam = lam - ws.beta * (inst.problem.A @ x - inst.problem.b)


def test_feasibility_contracts_geometrically():
    for seed in range(5):
        inst = make_known_scqp(10, 40, seed=seed, density=0.5)
        x, lam, trace = alm_solve(inst.problem, np.zeros(40), np.zeros(10))
        viol = trace.eq_violation
        for k in range(1, len(viol) - 1):
            if viol[k] <= 1e-12:
                break
            assert viol[k + 1] <= 0.5 * viol[k]


def test_max_outer_reports_nonconvergence():
    inst = make_known_scqp(10, 30, seed=1, density=0.5)
    x, lam, trace = alm_solve(inst.problem, np.zeros(30), np.zeros(10),
                              AlmConfig(max_outer=1))
    assert trace.status == "max_iter"
    assert trace.outer_iterations == 1


def test_trace_carries_final_kkt():
    inst = make_known_scqp(6, 18, seed=2, density=0.7)
    x, lam, trace = alm_solve(inst.problem, np.zeros(18), np.zeros(6))
    rep = check_scqp_kkt(inst.problem, x, lam)
    assert trace.final_kkt.stationarity_residual == pytest.approx(
        rep.stationarity_residual)
