"""Problem and result serialization.

Problems travel as a JSON manifest whose matrices are either inline
coordinate triples or relative paths to Matrix Market files. Netlib-style
LPs are ingested from a fixed/free-format MPS subset and converted to
standard form (equalities plus nonnegative variables) with a report that
maps solutions back to the original variables. Solver output is written
as a stable-keyed JSON document.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.io import mmread, mmwrite

from .problem import LinearProgram, StronglyConvexQP

__all__ = [
    "ManifestError",
    "MpsFormatError",
    "SolveResult",
    "ConversionReport",
    "read_manifest",
    "write_manifest",
    "read_mps",
    "write_result",
    "read_result",
]


class ManifestError(ValueError):
    """Manifest violates the schema; the message names the field."""


class MpsFormatError(ValueError):
    """MPS file is malformed or uses an unsupported feature."""


# ---------------------------------------------------------------------------
# JSON manifest

def _matrix_from_spec(spec, m, n, base_dir, path_name):
    if not isinstance(spec, dict):
        raise ManifestError(f"{path_name}: expected an object")
    if "coo" in spec:
        triples = spec["coo"]
        if not isinstance(triples, list):
            raise ManifestError(f"{path_name}.coo: expected a list of [i, j, v]")
        rows, cols, vals = [], [], []
        for k, t in enumerate(triples):
            if not isinstance(t, (list, tuple)) or len(t) != 3:
                raise ManifestError(f"{path_name}.coo[{k}]: expected [i, j, v]")
            i, j, v = t
            if not (0 <= int(i) < m and 0 <= int(j) < n):
                raise ManifestError(f"{path_name}.coo[{k}]: index out of range")
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
        return sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
    if "dense" in spec:
        arr = np.asarray(spec["dense"], dtype=float)
        if arr.shape != (m, n):
            raise ManifestError(f"{path_name}.dense: shape {arr.shape} != ({m}, {n})")
        return sp.csr_matrix(arr)
    if "path" in spec:
        mat = mmread(os.path.join(base_dir, spec["path"]))
        mat = sp.csr_matrix(mat)
        if mat.shape != (m, n):
            raise ManifestError(f"{path_name}.path: shape {mat.shape} != ({m}, {n})")
        return mat
    raise ManifestError(f"{path_name}: need one of 'coo', 'dense', 'path'")


def _vector_from_spec(vec, length, path_name):
    arr = np.asarray(vec, dtype=float).ravel()
    if arr.shape != (length,):
        raise ManifestError(f"{path_name}: expected length {length}, got {arr.shape[0]}")
    return arr


def read_manifest(path):
    """Load a problem manifest; returns (problem, metadata)."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON: {exc}") from None
    base_dir = os.path.dirname(os.path.abspath(path))
    kind = doc.get("type")
    if kind not in ("lp", "scqp"):
        raise ManifestError("type: must be 'lp' or 'scqp'")
    for key in ("m", "n"):
        if not isinstance(doc.get(key), int) or doc[key] < 1:
            raise ManifestError(f"{key}: must be a positive integer")
    m, n = doc["m"], doc["n"]
    if "A" not in doc:
        raise ManifestError("A: missing")
    A = _matrix_from_spec(doc["A"], m, n, base_dir, "A")
    if "b" not in doc:
        raise ManifestError("b: missing")
    b = _vector_from_spec(doc["b"], m, "b")
    meta = doc.get("metadata", {})
    if kind == "lp":
        if "c" not in doc:
            raise ManifestError("c: missing")
        c = _vector_from_spec(doc["c"], n, "c")
        return LinearProgram(A, b, c), meta
    if "r" not in doc:
        raise ManifestError("r: missing")
    r = _vector_from_spec(doc["r"], n, "r")
    qspec = doc.get("Q")
    if qspec is None:
        raise ManifestError("Q: missing")
    if isinstance(qspec, dict) and "factor" in qspec:
        fac = qspec["factor"]
        q = doc.get("q")
        if not isinstance(q, int) or q < 1:
            raise ManifestError("q: must be a positive integer when Q is factored")
        B = _matrix_from_spec(fac.get("B", {}), q, n, base_dir, "Q.factor.B")
        mu = float(fac.get("mu", 0.0))
        if mu <= 0:
            raise ManifestError("Q.factor.mu: must be positive")
        return StronglyConvexQP.from_factor(B, mu, A, r, b), meta
    Q = _matrix_from_spec(qspec, n, n, base_dir, "Q").toarray()
    return StronglyConvexQP(Q, A, r, b), meta


def _matrix_to_spec(mat, path, base_dir, as_file):
    if as_file:
        mat = sp.coo_matrix(mat)
        fname = path + ".mtx"
        mmwrite(os.path.join(base_dir, fname), mat)
        return {"path": fname}
    coo = sp.coo_matrix(mat)
    return {"coo": [[int(i), int(j), float(v)]
                    for i, j, v in zip(coo.row, coo.col, coo.data)]}


def write_manifest(problem, path, metadata=None, matrices_as_files=False):
    """Write a problem manifest (and .mtx side files when requested)."""
    base_dir = os.path.dirname(os.path.abspath(path))
    stem = os.path.splitext(os.path.basename(path))[0]
    doc = {"metadata": metadata or {}}
    if isinstance(problem, LinearProgram):
        doc.update(type="lp", m=problem.m, n=problem.n,
                   A=_matrix_to_spec(problem.A, stem + "_A", base_dir, matrices_as_files),
                   b=problem.b.tolist(), c=problem.c.tolist())
    elif isinstance(problem, StronglyConvexQP):
        doc.update(type="scqp", m=problem.m, n=problem.n,
                   A=_matrix_to_spec(problem.A, stem + "_A", base_dir, matrices_as_files),
                   b=problem.b.tolist(), r=problem.r.tolist(),
                   Q={"dense": problem.Q.tolist()})
    else:
        raise ManifestError(f"cannot serialize {type(problem).__name__}")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# MPS subset reader

SUPPORTED_SECTIONS = {"NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"}


def _mps_float(tok):
    try:
        return float(tok.replace("D", "E").replace("d", "e"))
    except ValueError:
        raise MpsFormatError(f"bad numeric field {tok!r}") from None


@dataclass(eq=False)
class ConversionReport:
    """How original MPS variables map into the standard-form columns."""

    name: str
    objective_row: str
    columns: dict = field(default_factory=dict)   # var -> mapping entry
    slack_rows: list = field(default_factory=list)
    bound_rows: list = field(default_factory=list)
    objective_offset: float = 0.0
    m_original: int = 0
    n_original: int = 0

    def map_back(self, x_std):
        """Recover original variable values from a standard-form vector."""
        x_std = np.asarray(x_std, dtype=float)
        out = {}
        for var, entry in self.columns.items():
            kind = entry["kind"]
            if kind == "fixed":
                out[var] = entry["value"]
            elif kind == "split":
                pos, neg = entry["index"]
                out[var] = x_std[pos] - x_std[neg]
            elif kind == "complemented":
                out[var] = entry["upper"] - x_std[entry["index"]]
            else:  # direct / shifted
                out[var] = x_std[entry["index"]] + entry.get("shift", 0.0)
        return out

    def original_objective(self, x_std, lp):
        """Objective in the original variables (offset included)."""
        return lp.objective(x_std) + self.objective_offset


def _parse_mps(path):
    name = None
    section = None
    row_types = {}
    row_order = []
    obj_row = None
    col_order = []
    col_entries = {}
    rhs = {}
    bounds = {}
    extra_free = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("*"):
                continue
            if not line[0].isspace():
                tok = line.split()
                header = tok[0].upper()
                if header not in SUPPORTED_SECTIONS:
                    raise MpsFormatError(f"line {lineno}: unsupported section {header!r}")
                if header == "ENDATA":
                    section = "ENDATA"
                    break
                if header == "NAME":
                    name = tok[1] if len(tok) > 1 else ""
                    continue
                section = header
                continue
            tok = line.split()
            if section == "ROWS":
                if len(tok) != 2:
                    raise MpsFormatError(f"line {lineno}: malformed row declaration")
                typ, rname = tok[0].upper(), tok[1]
                if typ not in ("N", "E", "L", "G"):
                    raise MpsFormatError(f"line {lineno}: unknown row type {typ!r}")
                if rname in row_types or rname == obj_row:
                    raise MpsFormatError(f"line {lineno}: duplicate row name {rname!r}")
                if typ == "N":
                    if obj_row is None:
                        obj_row = rname
                    else:
                        extra_free.add(rname)
                    continue
                row_types[rname] = typ
                row_order.append(rname)
            elif section == "COLUMNS":
                if len(tok) > 1 and tok[1] == "'MARKER'":
                    raise MpsFormatError(
                        f"line {lineno}: integer markers are not supported")
                cname = tok[0]
                if len(tok) not in (3, 5):
                    raise MpsFormatError(f"line {lineno}: malformed column data")
                if cname not in col_entries:
                    col_entries[cname] = {}
                    col_order.append(cname)
                for k in range(1, len(tok) - 1, 2):
                    rname, val = tok[k], _mps_float(tok[k + 1])
                    if rname in extra_free:
                        raise MpsFormatError(
                            f"line {lineno}: multiple objective rows are not supported")
                    if rname != obj_row and rname not in row_types:
                        raise MpsFormatError(
                            f"line {lineno}: unknown row {rname!r}")
                    col_entries[cname][rname] = col_entries[cname].get(rname, 0.0) + val
            elif section == "RHS":
                vals = tok[1:] if len(tok) % 2 == 1 else tok
                if len(vals) % 2 != 0 or not vals:
                    raise MpsFormatError(f"line {lineno}: malformed RHS data")
                for k in range(0, len(vals), 2):
                    rname, val = vals[k], _mps_float(vals[k + 1])
                    if rname != obj_row and rname not in row_types:
                        raise MpsFormatError(f"line {lineno}: unknown row {rname!r}")
                    rhs[rname] = val
            elif section == "BOUNDS":
                btype = tok[0].upper()
                if btype in ("UP", "LO", "FX"):
                    if len(tok) == 4:
                        _, cname, val = tok[1], tok[2], _mps_float(tok[3])
                    elif len(tok) == 3:
                        cname, val = tok[1], _mps_float(tok[2])
                    else:
                        raise MpsFormatError(f"line {lineno}: malformed bound")
                elif btype in ("FR", "MI"):
                    cname = tok[2] if len(tok) == 3 else tok[1]
                    val = None
                else:
                    raise MpsFormatError(
                        f"line {lineno}: unsupported bound type {btype!r}")
                if cname not in col_entries:
                    raise MpsFormatError(f"line {lineno}: unknown column {cname!r}")
                lo, up = bounds.get(cname, (0.0, np.inf))
                if btype == "UP":
                    up = val
                elif btype == "LO":
                    lo = val
                elif btype == "FX":
                    lo = up = val
                elif btype == "FR":
                    lo, up = -np.inf, np.inf
                elif btype == "MI":
                    lo = -np.inf
                bounds[cname] = (lo, up)
            elif section is None:
                raise MpsFormatError(f"line {lineno}: data before any section")
    if section != "ENDATA":
        raise MpsFormatError("missing ENDATA")
    if obj_row is None:
        raise MpsFormatError("missing objective row (type N)")
    if not row_order:
        raise MpsFormatError("no constraint rows")
    if not col_order:
        raise MpsFormatError("no columns")
    return (name or "", obj_row, row_types, row_order, col_order, col_entries,
            rhs, bounds)


def read_mps(path):
    """Read an MPS file and convert it to a standard-form LP.

    Returns (LinearProgram, ConversionReport). Inequality rows gain
    slack/surplus columns; finite lower bounds are shifted to zero, free
    and minus-infinity variables are split or complemented, and finite
    upper bounds become extra equality rows with their own slacks.
    RANGES sections and integer markers are rejected.
    """
    (name, obj_row, row_types, row_order, col_order, col_entries, rhs,
     bounds) = _parse_mps(path)
    m0 = len(row_order)
    report = ConversionReport(name=name, objective_row=obj_row,
                              m_original=m0, n_original=len(col_order))
    row_pos = {rname: i for i, rname in enumerate(row_order)}
    b = np.array([rhs.get(rname, 0.0) for rname in row_order])
    report.objective_offset = -rhs.get(obj_row, 0.0)

    cols = []       # list of (column vector as dict row->val, c coefficient)
    pending_upper = []  # (std column index, upper bound)

    for var in col_order:
        entries = col_entries[var]
        a = {row_pos[rn]: v for rn, v in entries.items() if rn != obj_row}
        cj = entries.get(obj_row, 0.0)
        lo, up = bounds.get(var, (0.0, np.inf))
        if up < lo:
            raise MpsFormatError(f"column {var!r}: inconsistent bounds [{lo}, {up}]")
        if lo == up:
            for i, v in a.items():
                b[i] -= v * lo
            report.objective_offset += cj * lo
            report.columns[var] = {"kind": "fixed", "value": lo}
            continue
        if np.isinf(lo) and np.isinf(up):
            idx_pos = len(cols)
            cols.append((a, cj))
            idx_neg = len(cols)
            cols.append(({i: -v for i, v in a.items()}, -cj))
            report.columns[var] = {"kind": "split", "index": [idx_pos, idx_neg]}
            continue
        if np.isinf(lo):
            # x = up - x', x' >= 0
            for i, v in a.items():
                b[i] -= v * up
            report.objective_offset += cj * up
            idx = len(cols)
            cols.append(({i: -v for i, v in a.items()}, -cj))
            report.columns[var] = {"kind": "complemented", "index": idx, "upper": up}
            continue
        shift = lo
        if shift != 0.0:
            for i, v in a.items():
                b[i] -= v * shift
            report.objective_offset += cj * shift
        idx = len(cols)
        cols.append((a, cj))
        entry = {"kind": "shifted" if shift else "direct", "index": idx}
        if shift:
            entry["shift"] = shift
        report.columns[var] = entry
        if np.isfinite(up):
            pending_upper.append((idx, up - shift, var))

    # inequality rows get slack (L) / surplus (G) columns
    for i, rname in enumerate(row_order):
        typ = row_types[rname]
        if typ == "E":
            continue
        idx = len(cols)
        cols.append(({i: 1.0 if typ == "L" else -1.0}, 0.0))
        report.slack_rows.append({"row": rname, "index": idx})

    # finite upper bounds become extra rows x' + s = up'
    n_rows = m0
    extra_b = []
    for col_idx, ub, var in pending_upper:
        if ub < 0:
            raise MpsFormatError(f"column {var!r}: negative shifted upper bound")
        row_i = n_rows
        n_rows += 1
        extra_b.append(ub)
        cols[col_idx][0][row_i] = cols[col_idx][0].get(row_i, 0.0) + 1.0
        idx = len(cols)
        cols.append(({row_i: 1.0}, 0.0))
        report.bound_rows.append({"var": var, "row_index": row_i,
                                  "slack_index": idx, "upper": ub})

    n_std = len(cols)
    rows_idx, cols_idx, vals = [], [], []
    c = np.zeros(n_std)
    for j, (a, cj) in enumerate(cols):
        c[j] = cj
        for i, v in a.items():
            rows_idx.append(i)
            cols_idx.append(j)
            vals.append(v)
    A = sp.coo_matrix((vals, (rows_idx, cols_idx)), shape=(n_rows, n_std)).tocsr()
    b_std = np.concatenate([b, np.array(extra_b)]) if extra_b else b
    return LinearProgram(A, b_std, c), report


# ---------------------------------------------------------------------------
# solve results

@dataclass(eq=False)
class SolveResult:
    """Solver output in a serialization-friendly shape."""

    x: np.ndarray
    objective: float
    eq_violation: float
    kkt_stationarity: float
    status: str
    counters: dict = field(default_factory=dict)
    wall_ms: float = 0.0
    lam: np.ndarray | None = None

    def to_dict(self):
        doc = {
            "x": [float(v) for v in np.asarray(self.x).ravel()],
            "objective": float(self.objective),
            "eq_violation": float(self.eq_violation),
            "kkt_stationarity": float(self.kkt_stationarity),
            "status": self.status,
            "counters": {k: (int(v) if float(v).is_integer() else float(v))
                         for k, v in self.counters.items()},
            "wall_ms": float(self.wall_ms),
        }
        if self.lam is not None:
            doc["lam"] = [float(v) for v in np.asarray(self.lam).ravel()]
        return doc

    @classmethod
    def from_dict(cls, doc):
        return cls(
            x=np.asarray(doc["x"], dtype=float),
            objective=doc["objective"],
            eq_violation=doc["eq_violation"],
            kkt_stationarity=doc["kkt_stationarity"],
            status=doc["status"],
            counters=dict(doc.get("counters", {})),
            wall_ms=doc.get("wall_ms", 0.0),
            lam=np.asarray(doc["lam"], dtype=float) if "lam" in doc else None,
        )


def result_to_json(result: SolveResult) -> str:
    """Serialize with stable key order; NaN/inf are refused."""
    doc = result.to_dict()
    try:
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False)
    except ValueError as exc:
        raise ValueError(f"refusing to serialize non-finite values: {exc}") from None


def write_result(result: SolveResult, path):
    text = result_to_json(result)
    with open(path, "w") as fh:
        fh.write(text)
        fh.write("\n")


def read_result(path) -> SolveResult:
    with open(path) as fh:
        return SolveResult.from_dict(json.load(fh))
