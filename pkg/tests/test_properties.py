"""Property suites driven by a generative harness (1000 cases each)."""

import copy
import json
import os
import tempfile

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from qpas.apg import ApgConfig, build_homotopy, filtrate, run_apg
from qpas.io_formats import (SolveResult, read_manifest, read_result,
                             write_manifest, write_result)
from qpas.pas import Finished, advance, init_tracker
from qpas.problem import BoxQP, LinearProgram

RUNS = settings(max_examples=1000, deadline=None, derandomize=True,
                suppress_health_check=[HealthCheck.filter_too_much,
                                       HealthCheck.too_slow])

TMP = tempfile.mkdtemp(prefix="qpas-prop-")


def box_from_seed(seed, n_max=6):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    B = rng.standard_normal((n, n))
    H = B.T @ B + 10.0 ** rng.uniform(-2, 0) * np.eye(n)
    f = -(B.T @ rng.standard_normal(n)) * 10.0 ** rng.uniform(-1, 1)
    return BoxQP(H, f)


def tracked_states(p):
    """Yield (state_before, state_after) across every committed breakpoint."""
    cfg = ApgConfig().resolve(p)
    y, _ = run_apg(p, cfg)
    z_hat = filtrate(y, cfg.eta)
    w = build_homotopy(p, z_hat, cfg.delta)
    s = init_tracker(p, w, z_hat)
    while True:
        before = copy.deepcopy(s)
        out = advance(p, w, s)
        if isinstance(out, Finished):
            return
        s = out
        if s.breakpoint_log and s.breakpoint_log[-1].kind != "reject":
            yield before, s


@RUNS
@given(st.integers(0, 2**31 - 1))
def test_path_continuity_across_breakpoints(seed):
    p = box_from_seed(seed)
    for before, after in tracked_states(p):
        t_i = after.t
        z_old = before.z_of_t(t_i)
        z_new = after.z_of_t(t_i)
        assert np.abs(z_old - z_new).max() <= 1e-9 * (1.0 + np.abs(z_old).max())


@RUNS
@given(st.integers(0, 2**31 - 1))
def test_sign_conditions_hold_below_committed_breakpoints(seed):
    p = box_from_seed(seed)
    for _, after in tracked_states(p):
        t_probe = after.t - 1e-9 * (1.0 + after.t)
        z_probe = after.u - t_probe * after.v
        c_probe = after.psi - t_probe * after.phi
        scale = 1.0 + np.abs(p.f).max()
        assert (z_probe > -1e-10 * scale).all()
        assert (c_probe > -1e-10 * scale).all()


@RUNS
@given(st.integers(0, 2**31 - 1))
def test_filtrate_idempotent(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    y = np.abs(rng.standard_normal(n)) * 10.0 ** rng.integers(-10, 3, size=n)
    eta = 10.0 ** rng.uniform(-9, -1)
    once = filtrate(y, eta)
    twice = filtrate(once, eta)
    assert np.array_equal(once, twice)
    assert (once[once > 0] >= eta * np.linalg.norm(y) - 1e-300).all()


@RUNS
@given(st.integers(0, 2**31 - 1))
def test_manifest_roundtrip_identity(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    n = int(rng.integers(m + 1, 9))
    A = rng.standard_normal((m, n))
    A[rng.random((m, n)) < 0.4] = 0.0
    if not A.any():
        A[0, 0] = 1.0
    lp = LinearProgram(A, rng.standard_normal(m), rng.standard_normal(n))
    path = os.path.join(TMP, "prop_manifest.json")
    write_manifest(lp, path, metadata={"seed": int(seed)})
    back, meta = read_manifest(path)
    assert meta["seed"] == int(seed)
    assert np.array_equal(back.A.toarray(), lp.A.toarray())
    assert np.array_equal(back.b, lp.b)
    assert np.array_equal(back.c, lp.c)


@RUNS
@given(st.integers(0, 2**31 - 1))
def test_result_roundtrip_identity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    res = SolveResult(
        x=rng.standard_normal(n) * 10.0 ** rng.integers(-12, 12),
        objective=float(rng.standard_normal()),
        eq_violation=float(abs(rng.standard_normal())) * 1e-9,
        kkt_stationarity=float(abs(rng.standard_normal())) * 1e-9,
        status=str(rng.choice(["optimal", "max_iter"])),
        counters={"pg_iters": int(rng.integers(0, 100)),
                  "chol_model_flops": float(rng.integers(0, 10**9))},
        wall_ms=float(abs(rng.standard_normal())) * 1e3,
        lam=rng.standard_normal(int(rng.integers(1, 5))),
    )
    path = os.path.join(TMP, "prop_result.json")
    write_result(res, path)
    back = read_result(path)
    assert np.array_equal(back.x, res.x)
    assert back.objective == res.objective
    assert back.eq_violation == res.eq_violation
    assert back.kkt_stationarity == res.kkt_stationarity
    assert back.status == res.status
    assert back.counters == {k: (int(v) if float(v).is_integer() else v)
                             for k, v in res.counters.items()}
    assert np.array_equal(back.lam, res.lam)
