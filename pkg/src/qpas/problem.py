"""Immutable problem instances and KKT certificate checks.

Three problem classes are supported:

* standard-form linear programs: min c'x s.t. Ax = b, x >= 0
* strongly convex quadratic programs: min x'Qx/2 + r'x s.t. Ax = b, x >= 0
* nonnegativity-constrained quadratic programs ("box QPs"):
  min z'Hz/2 + f'z s.t. z >= 0, which arise as the inner subproblem of the
  augmented-Lagrangian outer loop with H = Q + beta*A'A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "LinearProgram",
    "StronglyConvexQP",
    "BoxQP",
    "KktReport",
    "ProblemError",
    "build_box_qp",
    "check_box_kkt",
    "check_scqp_kkt",
    "check_lp_kkt",
]

SYMMETRY_RTOL = 1e-12


class ProblemError(ValueError):
    """Raised for dimension mismatches and definiteness failures."""


def _as_csr(A, m, n, name="A"):
    """Build an m-by-n CSR matrix, summing duplicate coordinate entries."""
    if sp.issparse(A):
        mat = A.tocsr().copy()
    else:
        arr = np.asarray(A, dtype=float)
        if arr.ndim == 2 and arr.shape == (m, n):
            mat = sp.csr_matrix(arr)
        elif arr.ndim == 2 and arr.shape[1] == 3:
            rows = arr[:, 0].astype(int)
            cols = arr[:, 1].astype(int)
            if arr.size and (rows.min() < 0 or cols.min() < 0):
                raise ProblemError(f"{name}: negative coordinate index")
            if arr.size and (rows.max() >= m or cols.max() >= n):
                raise ProblemError(f"{name}: coordinate index out of range")
            mat = sp.coo_matrix((arr[:, 2], (rows, cols)), shape=(m, n)).tocsr()
        else:
            raise ProblemError(f"{name}: expected {m}x{n} matrix or (i, j, v) triples")
    if mat.shape != (m, n):
        raise ProblemError(f"{name}: shape {mat.shape} does not match ({m}, {n})")
    mat.sum_duplicates()
    return mat


def _check_vector(v, n, name):
    arr = np.asarray(v, dtype=float).ravel()
    if arr.shape != (n,):
        raise ProblemError(f"{name}: expected length {n}, got {arr.shape}")
    return arr


def _check_spd(M, name):
    """Reject non-symmetric or non-positive-definite matrices."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ProblemError(f"{name}: expected a square matrix, got {M.shape}")
    scale = np.abs(M).max() if M.size else 0.0
    if np.abs(M - M.T).max() > SYMMETRY_RTOL * max(scale, 1.0):
        raise ProblemError(f"{name}: matrix is not symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ProblemError(f"{name}: matrix is not positive definite") from None
    return M


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Standard-form LP: min c'x subject to Ax = b, x >= 0."""

    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray

    def __init__(self, A, b, c, m=None, n=None):
        b = np.asarray(b, dtype=float).ravel()
        c = np.asarray(c, dtype=float).ravel()
        m = len(b) if m is None else m
        n = len(c) if n is None else n
        if m < 1 or n < 1:
            raise ProblemError("LP needs at least one row and one column")
        object.__setattr__(self, "A", _as_csr(A, m, n))
        object.__setattr__(self, "b", _check_vector(b, m, "b"))
        object.__setattr__(self, "c", _check_vector(c, n, "c"))

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def objective(self, x):
        return float(self.c @ np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class StronglyConvexQP:
    """SCQP: min x'Qx/2 + r'x subject to Ax = b, x >= 0, with Q SPD."""

    Q: np.ndarray
    A: sp.csr_matrix
    r: np.ndarray
    b: np.ndarray

    def __init__(self, Q, A, r, b):
        r = np.asarray(r, dtype=float).ravel()
        b = np.asarray(b, dtype=float).ravel()
        n, m = len(r), len(b)
        object.__setattr__(self, "Q", _check_spd(Q, "Q"))
        if self.Q.shape[0] != n:
            raise ProblemError(f"Q: shape {self.Q.shape} does not match n={n}")
        object.__setattr__(self, "A", _as_csr(A, m, n))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_factor(cls, B, mu, A, r, b):
        """Build Q = B'B + mu*I from a (sparse or dense) factor B."""
        if sp.issparse(B):
            Q = (B.T @ B).toarray()
        else:
            B = np.asarray(B, dtype=float)
            Q = B.T @ B
        Q[np.diag_indices_from(Q)] += mu
        Q = 0.5 * (Q + Q.T)
        return cls(Q, A, r, b)

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.Q @ x) + self.r @ x)


@dataclass(frozen=True, eq=False)
class BoxQP:
    """Nonnegativity-constrained QP: min z'Hz/2 + f'z subject to z >= 0."""

    H: np.ndarray
    f: np.ndarray

    def __init__(self, H, f, validate=True):
        f = np.asarray(f, dtype=float).ravel()
        if validate:
            H = _check_spd(H, "H")
        else:
            H = np.asarray(H, dtype=float)
        if H.shape != (len(f), len(f)):
            raise ProblemError(f"H: shape {H.shape} does not match n={len(f)}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "f", f)

    @property
    def n(self):
        return len(self.f)

    def gradient(self, z):
        return self.H @ np.asarray(z, dtype=float) + self.f

    def objective(self, z):
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ (self.H @ z) + self.f @ z)


@dataclass(frozen=True)
class KktReport:
    """Residuals of the first-order optimality system at a candidate point."""

    stationarity_residual: float
    eq_violation: float
    min_x: float
    complementarity: float

    def max_residual(self):
        return max(self.stationarity_residual, self.eq_violation,
                   self.complementarity, max(0.0, -self.min_x))


def build_box_qp(qp: StronglyConvexQP, beta: float, lam) -> BoxQP:
    """Form the inner subproblem H = Q + beta*A'A, f = r - A'lam - beta*A'b.

    beta is the (positive) penalty weight on ||Ax - b||^2 and lam the
    current multiplier estimate for the equality constraints.
    """
    if beta <= 0:
        raise ProblemError(f"beta must be positive, got {beta}")
    lam = _check_vector(lam, qp.m, "lam")
    AtA = (qp.A.T @ qp.A).toarray()
    H = qp.Q + beta * AtA
    H = 0.5 * (H + H.T)
    f = qp.r - qp.A.T @ lam - beta * (qp.A.T @ qp.b)
    return BoxQP(H, f)


def check_box_kkt(p: BoxQP, z, tol: float = 1e-9) -> KktReport:
    """Evaluate optimality of z for a box QP.

    z is optimal iff z >= 0, the gradient g = Hz + f vanishes on the
    support {z_j > 0} and is nonnegative elsewhere. tol decides which
    entries count as support.
    """
    z = _check_vector(z, p.n, "z")
    g = p.gradient(z)
    support = z > tol
    stat = float(np.abs(g[support]).max()) if support.any() else 0.0
    stat = max(stat, float(np.maximum(-g, 0.0).max()), float(np.maximum(-z, 0.0).max()))
    return KktReport(
        stationarity_residual=stat,
        eq_violation=0.0,
        min_x=float(z.min()) if z.size else 0.0,
        complementarity=float(np.abs(z * g).max()) if z.size else 0.0,
    )


def check_scqp_kkt(qp: StronglyConvexQP, x, lam, tol: float = 1e-9) -> KktReport:
    """Evaluate optimality of (x, lam) for an SCQP.

    The reduced gradient g = Qx + r - A'lam plays the role of the
    complementary slack variable: optimality requires g >= 0, g = 0 on
    the support of x, Ax = b and x >= 0.
    """
    x = _check_vector(x, qp.n, "x")
    lam = _check_vector(lam, qp.m, "lam")
    g = qp.Q @ x + qp.r - qp.A.T @ lam
    support = x > tol
    stat = float(np.abs(g[support]).max()) if support.any() else 0.0
    stat = max(stat, float(np.maximum(-g, 0.0).max()), float(np.maximum(-x, 0.0).max()))
    return KktReport(
        stationarity_residual=stat,
        eq_violation=float(np.linalg.norm(qp.A @ x - qp.b)),
        min_x=float(x.min()),
        complementarity=float(np.abs(x * g).max()),
    )


def check_lp_kkt(lp: LinearProgram, x, y, tol: float = 1e-9) -> KktReport:
    """Evaluate optimality of (x, y) for a standard-form LP.

    The dual slack is s = c - A'y; optimality requires s >= 0, s = 0 on
    the support of x, Ax = b and x >= 0.
    """
    x = _check_vector(x, lp.n, "x")
    y = _check_vector(y, lp.m, "y")
    s = lp.c - lp.A.T @ y
    support = x > tol
    stat = float(np.abs(s[support]).max()) if support.any() else 0.0
    stat = max(stat, float(np.maximum(-s, 0.0).max()), float(np.maximum(-x, 0.0).max()))
    return KktReport(
        stationarity_residual=stat,
        eq_violation=float(np.linalg.norm(lp.A @ x - lp.b)),
        min_x=float(x.min()),
        complementarity=float(np.abs(x * s).max()),
    )
