"""Reference solvers and synthetic instance constructors used by tests.

Everything here is independent of the solver stack: the box-QP oracle
enumerates candidate supports directly, and the known-solution generators
build problems backward from a certified optimality triple, so solver
output can be checked without trusting the solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .problem import BoxQP, LinearProgram, StronglyConvexQP

__all__ = [
    "KnownSolutionInstance",
    "OracleError",
    "enumerate_box_qp",
    "make_known_lp",
    "make_known_scqp",
    "gen_random",
]


class OracleError(RuntimeError):
    """Enumeration failed to certify a solution (degenerate instance)."""


@dataclass(frozen=True, eq=False)
class KnownSolutionInstance:
    """A problem bundled with a certified primal/dual optimal triple."""

    problem: object
    x_star: np.ndarray
    lam_star: np.ndarray
    s_star: np.ndarray


def enumerate_box_qp(p: BoxQP, max_n: int = 20) -> np.ndarray:
    """Solve a box QP by enumerating all candidate supports.

    For each subset S the equality system H[S, S] z_S = -f_S is solved;
    S is accepted when z_S > 0 and the gradient is nonnegative off S.
    Strict convexity makes the accepted point unique, which is asserted.
    """
    n = p.n
    if n > max_n:
        raise ValueError(f"enumeration limited to n <= {max_n}, got {n}")
    H, f = p.H, p.f
    accepted = []
    for k in range(n + 1):
        combos = np.array(list(combinations(range(n), k)), dtype=int)
        if combos.size == 0 and k > 0:
            continue
        if k == 0:
            if (f >= 0).all():
                accepted.append(np.zeros(n))
            continue
        # batched solve over all supports of size k
        Hs = H[combos[:, :, None], combos[:, None, :]]
        try:
            zs = np.linalg.solve(Hs, -f[combos][..., None])[..., 0]
        except np.linalg.LinAlgError:
            # fall back to per-subset solves, skipping singular blocks
            zs = np.full((len(combos), k), np.nan)
            for i, S in enumerate(combos):
                try:
                    zs[i] = np.linalg.solve(H[np.ix_(S, S)], -f[S])
                except np.linalg.LinAlgError:
                    pass
        pos = (zs > 0).all(axis=1) & np.isfinite(zs).all(axis=1)
        if not pos.any():
            continue
        # gradient over all coordinates: g = H[:, S] z_S + f
        g = np.einsum("bk,bkn->bn", zs[pos], H[combos[pos]]) + f
        outside = np.ones((pos.sum(), n), dtype=bool)
        rows = np.arange(pos.sum())[:, None]
        outside[rows, combos[pos]] = False
        ok = np.where(outside, g >= 0, True).all(axis=1)
        for zi in np.where(ok)[0]:
            z = np.zeros(n)
            z[combos[pos][zi]] = zs[pos][zi]
            accepted.append(z)
    if not accepted:
        raise OracleError("no support certified optimal; instance is degenerate")
    assert len(accepted) == 1, "multiple supports certified optimal"
    return accepted[0]


def _sparse_normal(rng, m, n, density):
    """sprandn-style matrix: standard normal values on a random pattern."""
    mat = sp.random(m, n, density=min(max(density, 0.0), 1.0), format="csr",
                    random_state=np.random.RandomState(rng.integers(2**31 - 1)),
                    data_rvs=None)
    mat.data = rng.standard_normal(mat.nnz)
    return mat


def _full_row_rank_support(rng, A, m, n, tries=60):
    """Pick a support B of size m with A[:, B] invertible."""
    for _ in range(tries):
        B = np.sort(rng.choice(n, size=m, replace=False))
        sub = A[:, B].toarray()
        if np.linalg.matrix_rank(sub) == m:
            return B, sub
    raise OracleError("could not find a nonsingular basis; raise density or n")


def make_known_lp(m, n, seed, density=0.5) -> KnownSolutionInstance:
    """Construct an LP whose optimum is known by complementary slackness.

    A basic support B of size m gets positive x*, the rest positive dual
    slack; b = A x* and c = A'y* + s* then certify x* as optimal.
    """
    if m >= n:
        raise ValueError("need m < n")
    rng = np.random.default_rng(seed)
    for _ in range(40):
        A = _sparse_normal(rng, m, n, density)
        try:
            B, _ = _full_row_rank_support(rng, A, m, n)
        except OracleError:
            continue
        break
    else:
        raise OracleError("failed to sample a usable constraint matrix")
    x_star = np.zeros(n)
    x_star[B] = rng.uniform(0.5, 1.5, size=m)
    y_star = rng.standard_normal(m)
    s_star = np.zeros(n)
    mask = np.ones(n, dtype=bool)
    mask[B] = False
    s_star[mask] = rng.uniform(0.5, 1.5, size=n - m)
    b = A @ x_star
    c = A.T @ y_star + s_star
    return KnownSolutionInstance(LinearProgram(A, b, c), x_star, y_star, s_star)


def make_known_scqp(m, n, seed, density=0.5, q=None, mu=1e-2) -> KnownSolutionInstance:
    """Construct an SCQP with certified optimum via r = -Qx* + A'y* + s*."""
    if m >= n:
        raise ValueError("need m < n")
    q = n if q is None else q
    rng = np.random.default_rng(seed)
    for _ in range(40):
        A = _sparse_normal(rng, m, n, density)
        if A.getnnz(axis=1).min() > 0:
            break
    else:
        raise OracleError("failed to sample a constraint matrix without empty rows")
    Bf = _sparse_normal(rng, q, n, density)
    Q = (Bf.T @ Bf).toarray()
    Q[np.diag_indices_from(Q)] += mu
    Q = 0.5 * (Q + Q.T)
    support = np.sort(rng.choice(n, size=min(m + n // 4, n - 1), replace=False))
    x_star = np.zeros(n)
    x_star[support] = rng.uniform(0.5, 1.5, size=len(support))
    y_star = rng.standard_normal(m)
    s_star = np.zeros(n)
    mask = np.ones(n, dtype=bool)
    mask[support] = False
    s_star[mask] = rng.uniform(0.5, 1.5, size=mask.sum())
    r = -Q @ x_star + A.T @ y_star + s_star
    b = A @ x_star
    return KnownSolutionInstance(StronglyConvexQP(Q, A, r, b), x_star, y_star, s_star)


def gen_random(kind, m, n, q=None, d_A=0.5, d_B=0.5, seed=0):
    """Random instances following the dense/sparse sampling recipes.

    LP: A standard normal with density d_A, b = 10*normal(m), c uniform(0,1).
    SCQP: additionally B (q-by-n, density d_B), Q = B'B + 1e-4*I and
    r = -B'normal(q). Instances are reproducible for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    A = _sparse_normal(rng, m, n, d_A)
    b = 10.0 * rng.standard_normal(m)
    if kind == "lp":
        c = rng.uniform(0.0, 1.0, size=n)
        return LinearProgram(A, b, c)
    if kind == "scqp":
        if q is None:
            raise ValueError("scqp generation needs q")
        B = _sparse_normal(rng, q, n, d_B)
        if d_B > 0.2:
            Bd = B.toarray()
            Q = Bd.T @ Bd
        else:
            Q = (B.T @ B).toarray()
        Q[np.diag_indices_from(Q)] += 1e-4
        Q = 0.5 * (Q + Q.T)
        r = -(B.T @ rng.standard_normal(q))
        return StronglyConvexQP(Q, A, r, b)
    raise ValueError(f"unknown kind {kind!r}")
