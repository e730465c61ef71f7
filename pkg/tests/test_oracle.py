import numpy as np
import pytest

from qpas.oracle import (enumerate_box_qp, gen_random, make_known_lp,
                         make_known_scqp)
from qpas.problem import BoxQP, check_lp_kkt, check_scqp_kkt


def test_enumerate_simple_support():
    p = BoxQP(np.eye(2), np.array([-1.0, 1.0]))
    assert np.allclose(enumerate_box_qp(p), [1.0, 0.0])


def test_enumerate_nonnegative_gradient_gives_zero():
    p = BoxQP(np.eye(3), np.array([0.5, 1.0, 0.0]))
    assert np.allclose(enumerate_box_qp(p), 0.0)


def test_enumerate_rejects_large_n():
    p = BoxQP(np.eye(3), np.zeros(3))
    with pytest.raises(ValueError):
        enumerate_box_qp(p, max_n=2)


def test_enumerate_agrees_with_projected_gradient_descent():
    # plain projected gradient descent to high accuracy as the cross-check
    rng = np.random.default_rng(10)
    B = rng.standard_normal((10, 10))
    H = B.T @ B + 0.5 * np.eye(10)
    f = rng.standard_normal(10)
    p = BoxQP(H, f)
    z_ref = enumerate_box_qp(p)
    L = np.linalg.eigvalsh(H).max()
    z = np.zeros(10)
    for _ in range(20000):
        z = np.maximum(z - (H @ z + f) / L, 0.0)
    assert np.abs(z - z_ref).max() <= 1e-9


def test_known_lp_hand_construction():
    inst = make_known_lp(1, 2, seed=0, density=1.0)
    lp = inst.problem
    assert np.allclose(lp.A @ inst.x_star, lp.b)
    assert inst.x_star @ inst.s_star == 0.0
    assert (inst.s_star >= 0).all()


def test_known_lp_certificates_by_construction():
    inst = make_known_lp(6, 20, seed=1)
    lp = inst.problem
    assert np.abs(lp.A @ inst.x_star - lp.b).max() <= 1e-14 * max(1.0, np.abs(lp.b).max())
    assert float(inst.x_star @ inst.s_star) == 0.0
    rep = check_lp_kkt(lp, inst.x_star, inst.lam_star)
    assert rep.stationarity_residual <= 1e-12


def test_known_lp_deterministic():
    a = make_known_lp(5, 15, seed=9)
    b = make_known_lp(5, 15, seed=9)
    assert np.array_equal(a.problem.A.toarray(), b.problem.A.toarray())
    assert np.array_equal(a.problem.c, b.problem.c)
    assert np.array_equal(a.x_star, b.x_star)


def test_known_scqp_hand_values():
    inst = make_known_scqp(1, 4, seed=2)
    qp = inst.problem
    rep = check_scqp_kkt(qp, inst.x_star, inst.lam_star)
    assert rep.stationarity_residual <= 1e-12
    assert rep.eq_violation <= 1e-12 * max(1.0, np.abs(qp.b).max())
    assert rep.complementarity <= 1e-12


def test_gen_random_deterministic():
    a = gen_random("lp", 6, 20, d_A=0.3, seed=5)
    b = gen_random("lp", 6, 20, d_A=0.3, seed=5)
    assert np.array_equal(a.A.toarray(), b.A.toarray())
    assert np.array_equal(a.b, b.b)
    assert np.array_equal(a.c, b.c)


def test_gen_random_scqp_is_spd():
    qp = gen_random("scqp", 5, 30, q=12, d_A=0.4, d_B=0.3, seed=3)
    ev = np.linalg.eigvalsh(qp.Q)
    assert ev.min() >= 1e-5


def test_gen_random_density_close_to_request():
    lp = gen_random("lp", 100, 120, d_A=0.25, seed=4)
    density = lp.A.nnz / (100 * 120)
    assert abs(density - 0.25) <= 0.05


def test_gen_random_lp_cost_uniform_unit():
    lp = gen_random("lp", 5, 200, d_A=0.5, seed=6)
    assert lp.c.min() >= 0.0 and lp.c.max() <= 1.0
