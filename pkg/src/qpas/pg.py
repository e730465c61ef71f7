"""Outer projected-gradient loop reducing an LP to a few projections.

Each iteration projects x - alpha*c onto the feasible polyhedron
{Ax = b, x >= 0}; the projection is itself a strongly convex QP with
identity Hessian, solved exactly by the augmented-Lagrangian two-stage
method. The objective c'x strictly decreases between feasible iterates
until a projection returns its own input, which certifies optimality;
the loop stops once the per-step decrease falls below f_tol.

The step alpha grows geometrically: any positive value is admissible and
larger steps reach the optimal face in fewer projections, while a modest
first step keeps the initial subproblems well conditioned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .alm import AlmConfig, AlmWorkspace
from .apg import estimate_step_bound
from .problem import LinearProgram, StronglyConvexQP, check_lp_kkt

__all__ = ["PgConfig", "PgTrace", "project_step", "pg_solve", "lp_certificate"]

FEAS_TOL = 1e-10


@dataclass(frozen=True)
class PgConfig:
    """Step schedule and stopping rule for the projection loop.

    f_tol None means 1e-9 * (1 + |c'x0|).
    """

    alpha0: float = 1.0
    rho: float = 2.0
    alpha_max: float = 1e6
    f_tol: float | None = None
    max_pg: int = 1000
    alm: AlmConfig = field(default_factory=AlmConfig)

    def validate(self):
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.rho < 1:
            raise ValueError("rho must be at least 1")
        if self.f_tol is not None and self.f_tol <= 0:
            raise ValueError("f_tol must be positive")


@dataclass(eq=False)
class PgTrace:
    """Per-projection progress records plus final dual estimates."""

    alpha: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    decrease: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    alm_outer: list = field(default_factory=list)
    apg_total: list = field(default_factory=list)
    pas_total: list = field(default_factory=list)
    eq_violation: list = field(default_factory=list)
    status: str = "optimal"
    y: np.ndarray | None = None
    dual_slack: np.ndarray | None = None
    duality_gap: float | None = None
    model_flops: float = 0.0
    qpoases_flops: float = 0.0
    wall_s: float = 0.0

    @property
    def iterations(self):
        return len(self.alpha)


class ProjectionEngine:
    """Projections onto {Ax = b, x >= 0} for a fixed LP.

    The subproblem Hessian is I + beta*A'A; A'A is cached densely so a
    new beta costs one scaled add. The dual scale of the projection of
    x - alpha*c grows with alpha, so unless the caller pinned beta it is
    scaled as beta0*(1 + alpha), which keeps the multiplier iteration
    contracting uniformly across the step schedule.
    """

    def __init__(self, lp: LinearProgram, cfg: AlmConfig):
        n = lp.n
        self.lp = lp
        self.cfg = cfg
        self.qp = StronglyConvexQP(np.eye(n), lp.A, np.zeros(n), lp.b)
        self.AtA = (lp.A.T @ lp.A).toarray()
        self.AtA_bound = estimate_step_bound(self.AtA)
        self.beta0 = cfg.beta if cfg.beta is not None else 20.0

    def _workspace(self, beta: float) -> AlmWorkspace:
        H = np.eye(self.lp.n) + beta * self.AtA
        L = 1.0 + beta * self.AtA_bound
        cfg = replace(self.cfg, beta=beta)
        return AlmWorkspace(self.qp, cfg, H=H, L=L)

    def project(self, point, alpha, x_start, lam_start, retries: int = 3):
        """Project `point`; on slow multiplier contraction retry with a
        sharply larger (but per-run fixed) penalty."""
        r = -np.asarray(point, dtype=float)
        beta = self.cfg.beta if self.cfg.beta is not None \
            else self.beta0 * (1.0 + alpha)
        x, lam = x_start, lam_start
        for attempt in range(retries + 1):
            x, lam, trace = self._workspace(beta).solve(x, lam, r=r)
            if trace.status == "optimal" or attempt == retries:
                return x, lam, trace
            beta *= 16.0


def project_step(lp: LinearProgram, x, alpha: float, cfg: AlmConfig = AlmConfig()):
    """Project x - alpha*c onto {Ax = b, x >= 0} (one-shot helper).

    The projection of a point p is the SCQP min ||x' - p||^2/2 over the
    feasible set, i.e. identity Hessian and linear term -p.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    engine = ProjectionEngine(lp, cfg)
    x = np.asarray(x, dtype=float)
    x_new, _, trace = engine.project(x - alpha * lp.c, alpha, x, np.zeros(lp.m))
    if trace.status != "optimal":
        raise RuntimeError(
            f"projection did not converge in {trace.outer_iterations} outer iterations")
    return x_new


def pg_solve(lp: LinearProgram, x0=None, cfg: PgConfig = PgConfig()):
    """Run projected-gradient iterations on an LP; returns (x, trace).

    The decrease-based stopping rule is sound only between feasible
    iterates, so with an infeasible start the first projection is never
    the stopping candidate. Each projection warm-starts from the previous
    solution and multiplier estimate.
    """
    cfg.validate()
    x = np.zeros(lp.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    f_tol = cfg.f_tol
    if f_tol is None:
        f_tol = 1e-9 * (1.0 + abs(lp.objective(x)))
    engine = ProjectionEngine(lp, cfg.alm)
    trace = PgTrace()
    start = time.perf_counter()

    feasible = (np.linalg.norm(lp.A @ x - lp.b) <= FEAS_TOL * (1.0 + np.linalg.norm(lp.b))
                and (x >= -FEAS_TOL).all())
    alpha = cfg.alpha0
    lam = np.zeros(lp.m)
    status = "max_iter"
    for sigma in range(cfg.max_pg):
        x_new, lam, alm_trace = engine.project(x - alpha * lp.c, alpha, x, lam)
        if alm_trace.status != "optimal":
            raise RuntimeError(
                f"projection {sigma} did not converge within "
                f"{alm_trace.outer_iterations} outer iterations")
        decrease = lp.objective(x) - lp.objective(x_new)
        trace.alpha.append(alpha)
        trace.objective.append(lp.objective(x_new))
        trace.decrease.append(decrease)
        trace.step_norm.append(float(np.linalg.norm(x_new - x)))
        trace.alm_outer.append(alm_trace.outer_iterations)
        trace.apg_total.append(int(np.sum(alm_trace.apg_iters)))
        trace.pas_total.append(int(np.sum(alm_trace.pas_steps)))
        trace.eq_violation.append(float(np.linalg.norm(lp.A @ x_new - lp.b)))
        trace.model_flops += alm_trace.model_flops
        trace.qpoases_flops += alm_trace.qpoases_flops
        stop_allowed = feasible or sigma >= 1
        x = x_new
        feasible = True
        if stop_allowed and decrease <= f_tol:
            status = "optimal"
            break
        alpha = min(cfg.rho * alpha, cfg.alpha_max)

    trace.status = status
    trace.wall_s = time.perf_counter() - start
    # at a fixed point, alpha*c - A'lam >= 0 is the scaled dual slack
    trace.y = lam / trace.alpha[-1]
    trace.dual_slack = lp.c - lp.A.T @ trace.y
    trace.duality_gap = float(lp.objective(x) - trace.y @ lp.b)
    return x, trace


def lp_certificate(lp: LinearProgram, x, trace: PgTrace, tol: float = 1e-9):
    """KKT report for a solution using the trace's recovered duals."""
    return check_lp_kkt(lp, x, trace.y, tol)
