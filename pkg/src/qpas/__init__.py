"""Two-stage augmented-Lagrangian solver for standard-form LPs and SCQPs.

Public surface:

* problem: immutable LP/SCQP/box-QP instances and KKT checkers
* cholesky: incremental principal-submatrix Cholesky factors
* apg: accelerated projected gradient warm-start stage
* pas: exact parametric active-set path tracking
* alm: augmented-Lagrangian outer loop for SCQP
* pg: projected-gradient outer loop for LP
* oracle: brute-force reference solvers and instance generators
* io_formats: manifests, Matrix Market, MPS subset and result files
* cli: command-line interface (`qpas ...`)
"""

from .alm import AlmConfig, AlmTrace, alm_solve
from .apg import ApgConfig, build_homotopy, filtrate, run_apg
from .cholesky import CholFactor, WorkSet, factor_from_scratch, qpoases_cost_model
from .pas import track
from .pg import PgConfig, PgTrace, pg_solve, project_step
from .problem import (BoxQP, KktReport, LinearProgram, StronglyConvexQP,
                      build_box_qp, check_box_kkt, check_lp_kkt, check_scqp_kkt)

__version__ = "0.1.0"

__all__ = [
    "AlmConfig", "AlmTrace", "alm_solve",
    "ApgConfig", "build_homotopy", "filtrate", "run_apg",
    "CholFactor", "WorkSet", "factor_from_scratch", "qpoases_cost_model",
    "track",
    "PgConfig", "PgTrace", "pg_solve", "project_step",
    "BoxQP", "KktReport", "LinearProgram", "StronglyConvexQP",
    "build_box_qp", "check_box_kkt", "check_lp_kkt", "check_scqp_kkt",
    "__version__",
]
