"""Augmented-Lagrangian outer loop for SCQP.

Each outer iteration minimizes the penalized Lagrangian over x >= 0 via
the two-stage inner solver (accelerated projected gradient warm start,
then exact path tracking), and then steps the multiplier
lam <- lam - beta*(Ax - b). Because the subproblems are solved exactly,
the feasibility residual contracts fast and the loop stops on a small
primal step.

The Hessian H = Q + beta*A'A of the subproblems does not depend on the
multiplier or on the linear term, so one workspace assembles it (and its
step bound) once and can be reused across solves that share Q, A and b,
which is exactly what the LP projection driver needs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .apg import ApgConfig, build_homotopy, estimate_step_bound, filtrate, run_apg
from .pas import track
from .problem import BoxQP, StronglyConvexQP, build_box_qp, check_scqp_kkt

__all__ = ["AlmConfig", "AlmTrace", "alm_solve", "AlmWorkspace"]


@dataclass(frozen=True)
class AlmConfig:
    """Outer-loop parameters.

    beta None means 10 * (1 + spectral-norm estimate of Q); tol bounds
    the primal step between consecutive outer iterates.
    """

    beta: float | None = None
    tol: float = 1e-10
    max_outer: int = 100
    apg: ApgConfig = field(default_factory=ApgConfig)

    def validate(self):
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(eq=False)
class AlmTrace:
    """Per-outer-iteration progress records."""

    eq_violation: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    apg_iters: list = field(default_factory=list)
    pas_steps: list = field(default_factory=list)
    pas_committed: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    beta: float = 0.0
    status: str = "optimal"
    final_kkt: object = None
    model_flops: float = 0.0
    qpoases_flops: float = 0.0
    wall_s: float = 0.0

    @property
    def outer_iterations(self):
        return len(self.eq_violation)


class AlmWorkspace:
    """Reusable solver state for SCQPs sharing Q, A, b and beta.

    H and L may be supplied precomputed (then cfg.beta must be set and
    H trusted to equal Q + beta*A'A); otherwise they are built here.
    """

    def __init__(self, qp: StronglyConvexQP, cfg: AlmConfig = AlmConfig(),
                 H=None, L=None):
        cfg.validate()
        self.qp = qp
        self.cfg = cfg
        if H is not None and cfg.beta is None:
            raise ValueError("a precomputed H requires an explicit beta")
        self.beta = cfg.beta if cfg.beta is not None else \
            10.0 * (1.0 + estimate_step_bound(qp.Q))
        self.H = build_box_qp(qp, self.beta, np.zeros(qp.m)).H if H is None else H
        self.Atb = qp.A.T @ qp.b
        if L is None:
            L = cfg.apg.L if cfg.apg.L is not None else estimate_step_bound(self.H)
        self.L = L

    def solve_subproblem(self, r, lam, x_start):
        """Exactly minimize the penalized Lagrangian over x >= 0."""
        f = r - self.qp.A.T @ lam - self.beta * self.Atb
        box = BoxQP(self.H, f, validate=False)
        apg_cfg = replace(self.cfg.apg, L=self.L).resolve(box)
        y, iters = run_apg(box, apg_cfg, z0=x_start)
        z_hat = filtrate(y, apg_cfg.eta)
        w = build_homotopy(box, z_hat, apg_cfg.delta)
        z, state = track(box, w, z_hat, delta=apg_cfg.delta)
        return z, iters, state

    def solve(self, x0, lam0, r=None):
        """Run the outer loop; r overrides the stored linear term."""
        qp, cfg = self.qp, self.cfg
        r = qp.r if r is None else np.asarray(r, dtype=float)
        x = np.asarray(x0, dtype=float).copy()
        lam = np.asarray(lam0, dtype=float).copy()
        if x.shape != (qp.n,) or lam.shape != (qp.m,):
            raise ValueError("x0/lam0 dimensions do not match the problem")
        trace = AlmTrace(beta=self.beta)
        start = time.perf_counter()
        status = "max_iter"
        for _ in range(cfg.max_outer):
            x_new, apg_iters, pas_state = self.solve_subproblem(r, lam, x)
            resid = qp.A @ x_new - qp.b
            lam = lam - self.beta * resid
            step = float(np.linalg.norm(x_new - x))
            trace.eq_violation.append(float(np.linalg.norm(resid)))
            trace.step_norm.append(step)
            trace.apg_iters.append(apg_iters)
            trace.pas_steps.append(pas_state.step_count)
            trace.pas_committed.append(pas_state.committed_steps)
            trace.objective.append(float(0.5 * x_new @ (qp.Q @ x_new) + r @ x_new))
            trace.model_flops += pas_state.model_flops
            trace.qpoases_flops += pas_state.qpoases_flops
            x = x_new
            if step <= cfg.tol * (1.0 + float(np.linalg.norm(x_new))):
                status = "optimal"
                break
        trace.status = status
        trace.wall_s = time.perf_counter() - start
        kkt_qp = qp if r is qp.r else _with_linear_term(qp, r)
        trace.final_kkt = check_scqp_kkt(kkt_qp, x, lam)
        return x, lam, trace


def _with_linear_term(qp: StronglyConvexQP, r):
    """Clone an SCQP with a different linear term, skipping revalidation."""
    clone = object.__new__(StronglyConvexQP)
    object.__setattr__(clone, "Q", qp.Q)
    object.__setattr__(clone, "A", qp.A)
    object.__setattr__(clone, "r", np.asarray(r, dtype=float))
    object.__setattr__(clone, "b", qp.b)
    return clone


def alm_solve(qp: StronglyConvexQP, x0, lam0, cfg: AlmConfig = AlmConfig()):
    """Solve an SCQP by the augmented-Lagrangian two-stage method.

    Returns (x, lam, trace); trace.status is "optimal" when the primal
    step dropped below cfg.tol and "max_iter" otherwise.
    """
    return AlmWorkspace(qp, cfg).solve(x0, lam0)
