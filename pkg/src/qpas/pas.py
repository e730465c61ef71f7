"""Second stage: exact solve of the box QP by tracking a homotopy path.

The shifted problem min z'Hz/2 + (f + t*w)'z, z >= 0 is solved at t = 1
by the warm-start point; its solution path z(t) is piecewise linear in t.
On each linear piece the positive set J is fixed and

    z_J(t) = u - t v,      u = -H[J,J]^{-1} f_J,   v = H[J,J]^{-1} w_J,
    c(t)   = psi - t phi   on the complement, psi = H[Jc,J] u + f_Jc,
                           phi = H[Jc,J] v - w_Jc.

Driving t down from 1, a breakpoint occurs when some z_j hits zero
(candidate leaves J) or some complement gradient c_j hits zero
(candidate enters J). The tracker commits whichever happens first,
validates the new piece by the strict sign of the recomputed v/phi entry,
and stops once both candidate ratios are nonpositive; z(0) then solves
the original box QP exactly.

J is kept ordered by descending warm-start value, so indices likely to
leave sit at the trailing end of the Cholesky factor where removal is
cheapest; entering indices are appended at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .apg import build_homotopy
from .cholesky import CholFactor, DegenerateUpdateError, factor_from_scratch
from .problem import BoxQP, check_box_kkt

__all__ = [
    "PasState",
    "BreakpointEvent",
    "Finished",
    "PasError",
    "NonTerminationError",
    "init_tracker",
    "next_breakpoint",
    "advance",
    "track",
]

RATIO_FLOOR = 1e-14
TIE_RTOL = 1e-12
WARM_START_KKT_TOL = 1e-10
STEP_CAP_FACTOR = 50
MAX_RESTARTS = 8


class PasError(RuntimeError):
    """Tracking could not proceed (bad warm start or degeneracy)."""


class NonTerminationError(PasError):
    """Step cap exceeded; the path appears to cycle."""


@dataclass(frozen=True)
class BreakpointEvent:
    """One record in the tracking log."""

    t: float
    kind: str  # add | remove | swap | reject
    removed: int | None = None
    added: int | None = None
    detail: str = ""

    def to_dict(self):
        return {"t": self.t, "kind": self.kind, "removed": self.removed,
                "added": self.added, "detail": self.detail}


@dataclass(eq=False)
class Finished:
    """Terminal tracking result carrying the exact solution."""

    z: np.ndarray


@dataclass(eq=False)
class PasState:
    """Path state on the current linear piece."""

    t: float
    factor: CholFactor          # tied to the ordered work set J
    jc: np.ndarray              # complement indices, ascending
    u: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    n: int
    step_count: int = 0
    breakpoint_log: list = field(default_factory=list)
    model_flops: float = 0.0
    qpoases_flops: float = 0.0

    @property
    def order(self):
        return self.factor.order

    @property
    def committed_steps(self):
        return sum(1 for e in self.breakpoint_log if e.kind != "reject")

    def z_of_t(self, t):
        """Evaluate the closed form of the current piece at parameter t."""
        z = np.zeros(self.n)
        if self.order:
            z[np.asarray(self.order, dtype=int)] = self.u - t * self.v
        return z


def _complement(order, n):
    mask = np.ones(n, dtype=bool)
    if order:
        mask[np.asarray(order, dtype=int)] = False
    return np.flatnonzero(mask)


def _edge_vectors(p: BoxQP, w, factor: CholFactor, jc):
    """Solve for u, v and form psi, phi for the given work set."""
    idx = np.asarray(factor.order, dtype=int)
    f_J = p.f[idx]
    w_J = w[idx]
    u = factor.solve(-f_J)
    v = factor.solve(w_J)
    if jc.size and idx.size:
        block = p.H[np.ix_(jc, idx)]
        psi = block @ u + p.f[jc]
        phi = block @ v - w[jc]
    else:
        psi = p.f[jc].copy()
        phi = -w[jc]
    return u, v, psi, phi


def init_tracker(p: BoxQP, w, z_hat) -> PasState:
    """Start tracking at t = 1 from a point solving the shifted problem.

    The work set is ordered by descending z_hat. Only one triangular-solve
    pair is spent here: u is solved for and v recovered from the identity
    z(1) = u - v, which holds because w cancels the gradient on the support.
    """
    z_hat = np.asarray(z_hat, dtype=float)
    w = np.asarray(w, dtype=float)
    shifted = BoxQP(p.H, p.f + w, validate=False)
    report = check_box_kkt(shifted, z_hat)
    if report.max_residual() > WARM_START_KKT_TOL * (1.0 + np.abs(shifted.f).max()):
        raise PasError(
            f"warm start does not solve the shifted problem "
            f"(residual {report.max_residual():.3e})")
    support = np.flatnonzero(z_hat > 0)
    order = support[np.argsort(-z_hat[support], kind="stable")].tolist()
    factor = factor_from_scratch(p.H, order)
    jc = _complement(order, p.n)
    idx = np.asarray(order, dtype=int)
    u = factor.solve(-p.f[idx])
    v = u - z_hat[idx]
    if jc.size and idx.size:
        block = p.H[np.ix_(jc, idx)]
        psi = block @ u + p.f[jc]
        phi = block @ v - w[jc]
    else:
        psi = p.f[jc].copy()
        phi = -w[jc]
    return PasState(t=1.0, factor=factor, jc=jc, u=u, v=v, psi=psi, phi=phi,
                    n=p.n)


def _best_ratio(num, den, limit, index_of):
    """Largest num/den below `limit` over entries with den < 0.

    Returns (index, ratio) using `index_of` to map positions to problem
    indices; exact ratio ties break toward the smallest index. Returns
    (None, -inf) when no entry qualifies.
    """
    neg = np.flatnonzero(den < 0)
    if not neg.size:
        return None, -np.inf
    ratios = num[neg] / den[neg]
    ok = ratios < limit
    if not ok.any():
        return None, -np.inf
    ratios = ratios[ok]
    cand = neg[ok]
    top = ratios.max()
    tied = cand[ratios == top]
    return int(min(index_of[q] for q in tied)), float(top)


def next_breakpoint(s: PasState):
    """Earliest leave/enter events strictly below the current t.

    Returns (j_out, t_out, j_in, t_in): the work-set index whose variable
    hits zero first and the complement index whose gradient hits zero
    first, with -inf ratios when a family has no candidate.
    """
    j_out, t_out = _best_ratio(s.u, s.v, s.t, s.order)
    j_in, t_in = _best_ratio(s.psi, s.phi, s.t, s.jc)
    return j_out, t_out, j_in, t_in


def _candidate(p, w, s, remove=None, add=None):
    """Build updated factor/vectors with `remove` dropped and `add` appended."""
    factor = s.factor.copy()
    if remove is not None:
        factor.remove_index(p.H, remove)
    if add is not None:
        factor.add_index(p.H, add)
    jc = _complement(factor.order, s.n)
    u, v, psi, phi = _edge_vectors(p, w, factor, jc)
    return factor, jc, u, v, psi, phi


def _commit(s, t_new, cand, kind, removed=None, added=None, detail=""):
    factor, jc, u, v, psi, phi = cand
    s.factor, s.jc, s.u, s.v, s.psi, s.phi = factor, jc, u, v, psi, phi
    s.t = t_new
    s.breakpoint_log.append(BreakpointEvent(t_new, kind, removed, added, detail))


def _count_candidate_flops(s, before_remove=None, before_add=None, tail=None):
    """Accrue both cost models for the factor updates actually performed."""
    if before_remove is not None:
        k = tail
        s.model_flops += (2.0 / 3.0) * k**3 + (before_remove - k) * k * k
        s.qpoases_flops += 2.5 * before_remove**2
    if before_add is not None:
        s.model_flops += 0.5 * before_add**2
        s.qpoases_flops += 5.0 * before_add**2


def advance(p: BoxQP, w, s: PasState):
    """Process one breakpoint; returns the state or Finished at t = 0.

    Whichever event family has the larger ratio fires; equal ratios
    (within a relative band) fire together as a swap. A committed update
    must pass a strict sign test on the recomputed entry (the entering
    variable must start growing, the leaving gradient must turn positive);
    a failed test reverts the work set, keeps the advanced t and logs a
    reject. Nonpositive ratios on both families terminate the path.
    """
    if s.step_count > STEP_CAP_FACTOR * s.n:
        raise NonTerminationError(
            f"no termination after {s.step_count} breakpoints")
    j_out, t_out, j_in, t_in = next_breakpoint(s)
    out_live = t_out > RATIO_FLOOR
    in_live = t_in > RATIO_FLOOR

    if not out_live and not in_live:
        return Finished(s.z_of_t(0.0))

    s.step_count += 1
    tie = (out_live and in_live and
           abs(t_out - t_in) <= TIE_RTOL * (1.0 + abs(s.t)))

    if tie:
        t_new = max(t_out, t_in)
        gamma = s.factor.size
        pos = s.factor.order.index(j_out)
        tail = gamma - pos - 1
        try:
            cand = _candidate(p, w, s, remove=j_out, add=j_in)
        except DegenerateUpdateError as exc:
            raise PasError(f"degenerate swap at t={t_new:.6g}: {exc}") from exc
        _count_candidate_flops(s, before_remove=gamma, tail=tail,
                               before_add=gamma - 1)
        factor, jc, u, v, psi, phi = cand
        phi_out = float(phi[np.searchsorted(jc, j_out)])
        v_in = float(v[factor.order.index(j_in)])
        ok_out, ok_in = phi_out > 0.0, v_in > 0.0
        if ok_out and ok_in:
            _commit(s, t_new, cand, "swap", removed=j_out, added=j_in)
        elif ok_in:
            # leaving index failed its sign test: degrade to the add
            cand = _candidate(p, w, s, add=j_in)
            _count_candidate_flops(s, before_add=gamma)
            _commit(s, t_new, cand, "add", added=j_in,
                    detail="swap degraded: leave test failed")
        elif ok_out:
            cand = _candidate(p, w, s, remove=j_out)
            _count_candidate_flops(s, before_remove=gamma, tail=tail)
            _commit(s, t_new, cand, "remove", removed=j_out,
                    detail="swap degraded: enter test failed")
        else:
            detail = "swap rejected"
            if phi_out == 0.0 or v_in == 0.0:
                detail += " (sign test exactly zero)"
            s.t = t_new
            s.breakpoint_log.append(BreakpointEvent(
                t_new, "reject", removed=j_out, added=j_in, detail=detail))
        return s

    if out_live and (t_out > t_in or not in_live):
        t_new = t_out
        gamma = s.factor.size
        pos = s.factor.order.index(j_out)
        tail = gamma - pos - 1
        try:
            cand = _candidate(p, w, s, remove=j_out)
        except DegenerateUpdateError as exc:
            raise PasError(f"degenerate removal at t={t_new:.6g}: {exc}") from exc
        _count_candidate_flops(s, before_remove=gamma, tail=tail)
        factor, jc, u, v, psi, phi = cand
        phi_out = float(phi[np.searchsorted(jc, j_out)])
        if phi_out > 0.0:
            _commit(s, t_new, cand, "remove", removed=j_out)
        else:
            detail = "leave test failed"
            if phi_out == 0.0:
                detail += " (exactly zero)"
            s.t = t_new
            s.breakpoint_log.append(BreakpointEvent(
                t_new, "reject", removed=j_out, detail=detail))
        return s

    t_new = t_in
    gamma = s.factor.size
    try:
        cand = _candidate(p, w, s, add=j_in)
    except DegenerateUpdateError as exc:
        raise PasError(f"degenerate insertion at t={t_new:.6g}: {exc}") from exc
    _count_candidate_flops(s, before_add=gamma)
    factor, jc, u, v, psi, phi = cand
    v_in = float(v[factor.order.index(j_in)])
    if v_in > 0.0:
        _commit(s, t_new, cand, "add", added=j_in)
    else:
        detail = "enter test failed"
        if v_in == 0.0:
            detail += " (exactly zero)"
        s.t = t_new
        s.breakpoint_log.append(BreakpointEvent(
            t_new, "reject", added=j_in, detail=detail))
    return s


def _repeated_reject(log):
    """True when the two latest events reject the same index at the same t."""
    if len(log) < 2:
        return False
    a, b = log[-1], log[-2]
    if a.kind != "reject" or b.kind != "reject":
        return False
    return (a.removed, a.added) == (b.removed, b.added) and \
        abs(a.t - b.t) <= 1e-14


def track(p: BoxQP, w, z_hat, delta: float | None = None):
    """Track the path from t = 1 to t = 0; returns (z, state).

    If the same breakpoint is rejected twice in a row (a numerically
    degenerate path), the homotopy is rebuilt from the current point with
    a doubled zero-set margin and tracking restarts.
    """
    w = np.asarray(w, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    restarts = 0
    total_steps = 0
    logs = []
    while True:
        s = init_tracker(p, w, z_hat)
        s.step_count = total_steps
        while True:
            out = advance(p, w, s)
            if isinstance(out, Finished):
                s.breakpoint_log = sum(logs, []) + s.breakpoint_log
                return out.z, s
            if _repeated_reject(s.breakpoint_log):
                break
        restarts += 1
        if restarts > MAX_RESTARTS:
            raise PasError("perturbation fallback exhausted; path remains degenerate")
        if delta is None:
            delta = 1e-2 * (1.0 + float(np.abs(p.f).max()))
        delta *= 2.0
        z_hat = np.maximum(s.z_of_t(s.t), 0.0)
        w = build_homotopy(p, z_hat, delta)
        s.breakpoint_log.append(BreakpointEvent(
            s.t, "reject", detail=f"perturbation restart, margin {delta:.3g}"))
        logs.append(s.breakpoint_log)
        total_steps = s.step_count
