"""Incremental Cholesky factorization of principal submatrices H[J, J].

The factor follows a mutable ordered index set J ("work set"). Indices are
always appended at the end of the order; removing an index keeps the leading
block of the triangle and refactors only the trailing block from a Schur
complement. When removals concentrate near the end of the order (which the
descending-value sort in the path tracker arranges), both updates are cheap.

Each update also accumulates two model flop counts: one for this trailing
refactorization scheme and one for the rotation-based scheme used by
mainstream parametric active-set codes, so solver reports can compare them
on identical update sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "WorkSet",
    "CholFactor",
    "DegenerateUpdateError",
    "factor_from_scratch",
    "qpoases_cost_model",
]

PIVOT_RTOL = 1e-13


class DegenerateUpdateError(ArithmeticError):
    """A pivot fell below threshold: H[J, J] is numerically not SPD."""


def qpoases_cost_model(op: str, gamma: int) -> float:
    """Model flops per work-set update in rotation-based active-set codes.

    Adding an index costs 5*gamma^2, removing one 2.5*gamma^2, where gamma
    is the work-set size when the update is applied.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if op == "add":
        return 5.0 * gamma * gamma
    if op == "remove":
        return 2.5 * gamma * gamma
    raise ValueError(f"unknown op {op!r}")


@dataclass(frozen=True)
class WorkSet:
    """Ordered set of distinct indices into {0..n-1}."""

    order: tuple

    def __init__(self, order):
        order = tuple(int(j) for j in order)
        if len(set(order)) != len(order):
            raise ValueError("work set contains duplicate indices")
        if any(j < 0 for j in order):
            raise ValueError("work set contains negative indices")
        object.__setattr__(self, "order", order)

    def __len__(self):
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def position(self, j):
        return self.order.index(j)

    def complement(self, n):
        inside = set(self.order)
        return tuple(j for j in range(n) if j not in inside)


@dataclass(eq=False)
class CholFactor:
    """Upper-triangular R with R'R = H[J, J] in the current order of J.

    Exclusively owned by one tracker while being mutated; `solve` on a
    quiescent factor is safe to call concurrently.
    """

    R: np.ndarray
    order: list
    flops_update: float = 0.0
    flops_qpoases: float = 0.0

    @property
    def size(self):
        return len(self.order)

    def copy(self):
        return CholFactor(self.R.copy(), list(self.order),
                          self.flops_update, self.flops_qpoases)

    def workset(self):
        return WorkSet(self.order)

    def _pivot_threshold(self, H):
        return PIVOT_RTOL * float(np.diag(H).max()) if H.size else 0.0

    def add_index(self, H, j):
        """Append index j to the order and extend R by one column.

        The new column solves R'r = H[J, j]; the new corner pivot is
        sqrt(H[j, j] - r'r) and must stay above the pivot threshold.
        """
        j = int(j)
        if j in self.order:
            raise ValueError(f"index {j} already in work set")
        gamma = self.size
        idx = np.asarray(self.order, dtype=int)
        col = np.asarray(H[idx, j], dtype=float).ravel()
        if gamma:
            r = solve_triangular(self.R, col, trans="T", lower=False,
                                 check_finite=False)
        else:
            r = np.zeros(0)
        d = float(H[j, j] - r @ r)
        if d <= self._pivot_threshold(H):
            raise DegenerateUpdateError(
                f"pivot {d:.3e} below threshold while adding index {j}")
        R_new = np.zeros((gamma + 1, gamma + 1))
        R_new[:gamma, :gamma] = self.R
        R_new[:gamma, gamma] = r
        R_new[gamma, gamma] = np.sqrt(d)
        self.R = R_new
        self.order.append(j)
        self.flops_update += 0.5 * gamma * gamma
        self.flops_qpoases += qpoases_cost_model("add", gamma)

    def remove_index(self, H, j):
        """Drop index j, refactoring only the block behind its position.

        With the order split as [J1, j, J2], the leading R block over J1
        is kept verbatim and the trailing block is refactored from
        H[J2, J2] - R12'R12 where R12 are the retained rows above it.
        """
        j = int(j)
        if j not in self.order:
            raise ValueError(f"index {j} not in work set")
        gamma = self.size
        p = self.order.index(j)
        tail = np.asarray(self.order[p + 1:], dtype=int)
        k = len(tail)
        R11 = self.R[:p, :p]
        R12 = self.R[:p, p + 1:]
        if k:
            S = H[np.ix_(tail, tail)] - R12.T @ R12
            S = 0.5 * (S + S.T)
            try:
                R_bar = np.linalg.cholesky(S).T
            except np.linalg.LinAlgError:
                raise DegenerateUpdateError(
                    f"trailing refactorization failed removing index {j}") from None
            if float(np.diag(R_bar).min()) ** 2 <= self._pivot_threshold(H):
                raise DegenerateUpdateError(
                    f"pivot below threshold while removing index {j}")
        else:
            R_bar = np.zeros((0, 0))
        R_new = np.zeros((gamma - 1, gamma - 1))
        R_new[:p, :p] = R11
        R_new[:p, p:] = R12
        R_new[p:, p:] = R_bar
        self.R = R_new
        del self.order[p]
        self.flops_update += (2.0 / 3.0) * k ** 3 + (gamma - k) * k * k
        self.flops_qpoases += qpoases_cost_model("remove", gamma)

    def solve(self, rhs):
        """Return H[J, J]^{-1} rhs via two triangular solves."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.size:
            raise ValueError(f"rhs has length {rhs.shape[0]}, factor size {self.size}")
        if self.size == 0:
            return np.zeros_like(rhs)
        y = solve_triangular(self.R, rhs, trans="T", lower=False, check_finite=False)
        return solve_triangular(self.R, y, lower=False, check_finite=False)


def factor_from_scratch(H, J) -> CholFactor:
    """Factor H[J, J] in the order given by J."""
    order = [int(j) for j in (J.order if isinstance(J, WorkSet) else J)]
    if len(set(order)) != len(order):
        raise ValueError("work set contains duplicate indices")
    idx = np.asarray(order, dtype=int)
    sub = np.asarray(H, dtype=float)[np.ix_(idx, idx)] if len(order) else np.zeros((0, 0))
    try:
        R = np.linalg.cholesky(0.5 * (sub + sub.T)).T if len(order) else np.zeros((0, 0))
    except np.linalg.LinAlgError:
        raise DegenerateUpdateError("H[J, J] is not positive definite") from None
    if len(order):
        thresh = PIVOT_RTOL * float(np.diag(np.asarray(H, dtype=float)).max())
        if float(np.diag(R).min()) ** 2 <= thresh:
            raise DegenerateUpdateError("pivot below threshold in fresh factorization")
    return CholFactor(R, order)
