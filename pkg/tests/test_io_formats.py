import json
import os

import numpy as np
import pytest

from qpas.io_formats import (ConversionReport, ManifestError, MpsFormatError,
                             SolveResult, read_manifest, read_mps, read_result,
                             result_to_json, write_manifest, write_result)
from qpas.problem import LinearProgram, StronglyConvexQP

DATA = os.path.join(os.path.dirname(__file__), "data")


def test_minimal_lp_manifest(tmp_path):
    doc = {
        "type": "lp", "m": 1, "n": 2,
        "A": {"coo": [[0, 0, 1.0], [0, 1, 1.0]]},
        "b": [1.0], "c": [1.0, 0.0],
    }
    path = tmp_path / "lp.json"
    path.write_text(json.dumps(doc))
    lp, meta = read_manifest(path)
    assert isinstance(lp, LinearProgram)
    assert lp.A.toarray().tolist() == [[1.0, 1.0]]
    assert lp.b.tolist() == [1.0]
    assert lp.c.tolist() == [1.0, 0.0]


def test_manifest_dimension_mismatch_names_field(tmp_path):
    doc = {"type": "lp", "m": 1, "n": 3,
           "A": {"coo": [[0, 0, 1.0]]}, "b": [1.0], "c": [1.0, 0.0]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ManifestError, match="c"):
        read_manifest(path)


def test_manifest_out_of_range_triple(tmp_path):
    doc = {"type": "lp", "m": 1, "n": 2,
           "A": {"coo": [[0, 5, 1.0]]}, "b": [1.0], "c": [1.0, 0.0]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ManifestError, match=r"A\.coo\[0\]"):
        read_manifest(path)


def test_manifest_roundtrip_lp(tmp_path):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 5))
    A[rng.random((3, 5)) < 0.5] = 0.0
    lp = LinearProgram(A, rng.standard_normal(3), rng.standard_normal(5))
    path = tmp_path / "round.json"
    write_manifest(lp, path, metadata={"name": "round"})
    back, meta = read_manifest(path)
    assert meta["name"] == "round"
    assert np.array_equal(back.A.toarray(), lp.A.toarray())
    assert np.array_equal(back.b, lp.b)
    assert np.array_equal(back.c, lp.c)


def test_manifest_roundtrip_scqp_with_mm_files(tmp_path):
    rng = np.random.default_rng(1)
    B = rng.standard_normal((4, 3))
    qp = StronglyConvexQP(B.T @ B + np.eye(3), np.ones((1, 3)),
                          rng.standard_normal(3), [1.0])
    path = tmp_path / "qp.json"
    write_manifest(qp, path, matrices_as_files=True)
    assert (tmp_path / "qp_A.mtx").exists()
    back, _ = read_manifest(path)
    assert np.allclose(back.Q, qp.Q)
    assert np.array_equal(back.A.toarray(), qp.A.toarray())


def test_manifest_rejects_non_spd_q(tmp_path):
    doc = {"type": "scqp", "m": 1, "n": 2,
           "A": {"coo": [[0, 0, 1.0], [0, 1, 1.0]]}, "b": [1.0],
           "r": [0.0, 0.0], "Q": {"dense": [[1.0, 2.0], [2.0, 1.0]]}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(Exception, match="positive definite"):
        read_manifest(path)


def write_mps(tmp_path, text):
    path = tmp_path / "prob.mps"
    path.write_text(text)
    return path


def test_mps_single_equality_row(tmp_path):
    path = write_mps(tmp_path, """NAME          TINY
ROWS
 N  COST
 E  R1
COLUMNS
    X1        COST           1.0   R1             1.0
    X2        R1             1.0
RHS
    B         R1             1.0
ENDATA
""")
    lp, report = read_mps(path)
    assert lp.m == 1 and lp.n == 2
    assert lp.A.toarray().tolist() == [[1.0, 1.0]]
    assert lp.c.tolist() == [1.0, 0.0]
    assert report.slack_rows == []


def test_mps_l_row_gains_slack(tmp_path):
    path = write_mps(tmp_path, """NAME          TINY2
ROWS
 N  COST
 L  R1
COLUMNS
    X1        COST           1.0   R1             2.0
RHS
    B         R1             4.0
ENDATA
""")
    lp, report = read_mps(path)
    assert lp.m == 1 and lp.n == 2
    assert lp.A.toarray().tolist() == [[2.0, 1.0]]
    assert lp.c.tolist() == [1.0, 0.0]
    assert len(report.slack_rows) == 1


def test_mps_g_row_gains_surplus(tmp_path):
    path = write_mps(tmp_path, """NAME          TINY3
ROWS
 N  COST
 G  R1
COLUMNS
    X1        COST           1.0   R1             1.0
RHS
    B         R1             2.0
ENDATA
""")
    lp, _ = read_mps(path)
    assert lp.A.toarray().tolist() == [[1.0, -1.0]]


def test_mps_bounds_conversions(tmp_path):
    path = write_mps(tmp_path, """NAME          BNDS
ROWS
 N  COST
 E  R1
COLUMNS
    XU        COST           1.0   R1             1.0
    XL        COST           1.0   R1             1.0
    XF        COST           1.0   R1             1.0
    XX        COST           1.0   R1             1.0
    XM        COST           1.0   R1             1.0
RHS
    B         R1             10.0
BOUNDS
 UP BND       XU             4.0
 LO BND       XL             2.0
 FR BND       XF
 FX BND       XX             3.0
 MI BND       XM
 UP BND       XM             5.0
ENDATA
""")
    lp, report = read_mps(path)
    # XX eliminated; XF split; XM complemented; XU gains a bound row
    assert report.columns["XX"] == {"kind": "fixed", "value": 3.0}
    assert report.columns["XF"]["kind"] == "split"
    assert report.columns["XM"]["kind"] == "complemented"
    assert report.columns["XL"]["kind"] == "shifted"
    assert len(report.bound_rows) == 1
    assert lp.m == 2  # R1 plus the XU bound row
    # a feasible standard-form point maps back consistently
    x = np.zeros(lp.n)
    mapped = report.map_back(x)
    assert mapped["XX"] == 3.0
    assert mapped["XM"] == 5.0
    assert mapped["XL"] == 2.0


def test_mps_bound_shift_preserves_objective(tmp_path):
    path = write_mps(tmp_path, """NAME          SHIFT
ROWS
 N  COST
 E  R1
COLUMNS
    X1        COST           2.0   R1             1.0
    X2        COST           1.0   R1             1.0
RHS
    B         R1             5.0
BOUNDS
 LO BND       X1             1.0
ENDATA
""")
    lp, report = read_mps(path)
    # original optimum: x1 at its lower bound 1, x2 = 4, objective 6
    from qpas.pg import pg_solve
    x, trace = pg_solve(lp)
    assert abs(report.original_objective(x, lp) - 6.0) <= 1e-6
    mapped = report.map_back(x)
    assert mapped["X1"] == pytest.approx(1.0, abs=1e-7)
    assert mapped["X2"] == pytest.approx(4.0, abs=1e-7)


def test_mps_rejects_ranges(tmp_path):
    path = write_mps(tmp_path, """NAME          RNG
ROWS
 N  COST
 L  R1
COLUMNS
    X1        COST           1.0   R1             1.0
RHS
    B         R1             1.0
RANGES
    RNG       R1             0.5
ENDATA
""")
    with pytest.raises(MpsFormatError, match="RANGES"):
        read_mps(path)


def test_mps_rejects_duplicate_rows(tmp_path):
    path = write_mps(tmp_path, """NAME          DUP
ROWS
 N  COST
 E  R1
 E  R1
COLUMNS
    X1        COST           1.0   R1             1.0
RHS
ENDATA
""")
    with pytest.raises(MpsFormatError, match="duplicate"):
        read_mps(path)


def test_mps_requires_objective_row(tmp_path):
    path = write_mps(tmp_path, """NAME          NOOBJ
ROWS
 E  R1
COLUMNS
    X1        R1             1.0
RHS
ENDATA
""")
    with pytest.raises(MpsFormatError, match="objective"):
        read_mps(path)


def test_afiro_fixture_shape():
    lp, report = read_mps(os.path.join(DATA, "afiro.mps"))
    assert report.name == "AFIRO"
    assert report.m_original == 27
    assert report.n_original == 32
    assert lp.m == 27
    assert lp.n == 51  # 32 structural columns + 19 slacks


def test_result_roundtrip(tmp_path):
    res = SolveResult(x=np.array([0.0, 1.0]), objective=0.0, eq_violation=1e-12,
                      kkt_stationarity=1e-11, status="optimal",
                      counters={"pg_iters": 3, "chol_model_flops": 12.5},
                      wall_ms=4.25, lam=np.array([0.5]))
    path = tmp_path / "res.json"
    write_result(res, path)
    back = read_result(path)
    assert np.array_equal(back.x, res.x)
    assert back.objective == res.objective
    assert back.status == "optimal"
    assert back.counters["pg_iters"] == 3
    assert back.counters["chol_model_flops"] == 12.5
    assert np.array_equal(back.lam, res.lam)


def test_result_refuses_nan():
    res = SolveResult(x=np.array([np.nan]), objective=0.0, eq_violation=0.0,
                      kkt_stationarity=0.0, status="error")
    with pytest.raises(ValueError, match="non-finite"):
        result_to_json(res)


def test_result_stable_key_order():
    res = SolveResult(x=np.array([1.0]), objective=1.0, eq_violation=0.0,
                      kkt_stationarity=0.0, status="optimal")
    text = result_to_json(res)
    keys = [line.split('"')[1] for line in text.splitlines()
            if line.startswith('  "')]
    assert keys == sorted(keys)
