"""First stage: accelerated projected gradient on the box QP.

Runs Nesterov-extrapolated gradient steps with projection onto z >= 0
until the support stabilizes or steps stall, then converts the iterate
into a warm start for the exact path-tracking stage: small entries are
filtered to zero, and a gradient shift w is built so the filtered point
exactly solves the shifted problem min z'Hz/2 + (f+w)'z, z >= 0 with a
strict margin on its zero set.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .problem import BoxQP

__all__ = [
    "ApgConfig",
    "ApgState",
    "estimate_step_bound",
    "apg_step",
    "should_terminate",
    "filtrate",
    "build_homotopy",
    "run_apg",
]


@dataclass(frozen=True)
class ApgConfig:
    """Tuning knobs for the accelerated projected gradient stage.

    L must dominate the spectral norm of H. None for L, delta or
    max_iters means "derive from the problem" (see `resolve`).
    """

    L: float | None = None
    s_max: int = 10
    eps_active: float = 1e-6
    eps_step: float = 1e-8
    eta: float = 1e-7
    delta: float | None = None
    max_iters: int | None = None

    def resolve(self, p: BoxQP) -> "ApgConfig":
        """Fill in problem-dependent defaults for a concrete box QP."""
        L = self.L if self.L is not None else estimate_step_bound(p.H)
        delta = self.delta
        if delta is None:
            delta = 1e-2 * (1.0 + float(np.abs(p.f).max()))
        max_iters = self.max_iters if self.max_iters is not None else 10 * p.n
        cfg = replace(self, L=L, delta=delta, max_iters=max_iters)
        cfg.validate()
        return cfg

    def validate(self):
        if self.L is not None and self.L <= 0:
            raise ValueError("L must be positive")
        if self.s_max < 1:
            raise ValueError("s_max must be at least 1")
        for name in ("eps_active", "eps_step", "eta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")


@dataclass(eq=False)
class ApgState:
    """One accelerated-projection iteration's rolling state."""

    z: np.ndarray
    y: np.ndarray
    y_prev: np.ndarray
    theta: float
    l: int
    support_history: deque = field(default_factory=deque)


def estimate_step_bound(H, iters: int = 100) -> float:
    """Upper bound on the spectral norm of a symmetric PSD matrix.

    Power iteration (deterministic start) with a 1.01 safety factor;
    if it has not settled within `iters` steps the max-row-sum bound is
    returned instead. Both are valid upper bounds for the step rule.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    if n == 0:
        return 1.0
    row_sum_bound = float(np.abs(H).sum(axis=1).max())
    if row_sum_bound == 0.0:
        return 1.0
    v = np.ones(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    converged = False
    for _ in range(iters):
        w = H @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        v = w / norm
        lam = float(v @ (H @ v))
        if abs(lam - lam_prev) <= 1e-12 * max(abs(lam), 1.0):
            converged = True
            lam_prev = lam
            break
        lam_prev = lam
    if not converged:
        return row_sum_bound
    return min(1.01 * lam_prev, row_sum_bound)


def support_count(y, eps_active: float) -> int:
    """Number of entries exceeding eps_active * ||y||."""
    y = np.asarray(y, dtype=float)
    return int(np.count_nonzero(y > eps_active * np.linalg.norm(y)))


def initial_state(p: BoxQP, cfg: ApgConfig, z0=None) -> ApgState:
    z0 = np.zeros(p.n) if z0 is None else np.maximum(np.asarray(z0, dtype=float), 0.0)
    hist = deque(maxlen=cfg.s_max + 1)
    hist.append(support_count(z0, cfg.eps_active))
    return ApgState(z=z0.copy(), y=z0.copy(), y_prev=z0.copy(), theta=1.0, l=0,
                    support_history=hist)


def apg_step(s: ApgState, p: BoxQP, cfg: ApgConfig) -> ApgState:
    """One accelerated step: project the gradient move, then extrapolate."""
    y_new = np.maximum(s.z - (p.H @ s.z + p.f) / cfg.L, 0.0)
    theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * s.theta**2))
    z_new = y_new + ((s.theta - 1.0) / theta_next) * (y_new - s.y)
    s.support_history.append(support_count(y_new, cfg.eps_active))
    return ApgState(z=z_new, y=y_new, y_prev=s.y, theta=theta_next, l=s.l + 1,
                    support_history=s.support_history)


def should_terminate(s: ApgState, cfg: ApgConfig) -> bool:
    """Stop on a stable support count, a tiny relative step, or the cap."""
    if s.l >= cfg.max_iters:
        return True
    hist = s.support_history
    if len(hist) == cfg.s_max + 1 and len(set(hist)) == 1:
        return True
    step = np.linalg.norm(s.y - s.y_prev)
    norm = np.linalg.norm(s.y)
    if norm == 0.0:
        return step == 0.0
    return step / norm < cfg.eps_step


def filtrate(y, eta: float):
    """Zero the entries of y below eta * ||y||."""
    y = np.asarray(y, dtype=float)
    return np.where(y >= eta * np.linalg.norm(y), y, 0.0)


def build_homotopy(p: BoxQP, z_hat, delta: float):
    """Gradient shift w making z_hat the exact optimum of the shifted QP.

    On the support of z_hat, w cancels the gradient; on the zero set a
    shared shift xi lifts every gradient entry to at least delta, so the
    shifted problem is solved by z_hat with strict complements.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    z_hat = np.asarray(z_hat, dtype=float)
    if (z_hat < 0).any():
        raise ValueError("z_hat must be nonnegative")
    g = p.H @ z_hat + p.f
    w = -g.copy()
    zero = z_hat == 0.0
    if zero.any():
        xi = -float(g[zero].min()) + delta
        w[zero] = xi
    return w


def run_apg(p: BoxQP, cfg: ApgConfig, z0=None):
    """Iterate until a termination rule fires; returns (y, iterations)."""
    cfg = cfg.resolve(p)
    state = initial_state(p, cfg, z0)
    while True:
        state = apg_step(state, p, cfg)
        if should_terminate(state, cfg):
            return state.y, state.l
