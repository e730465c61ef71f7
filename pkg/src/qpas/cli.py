"""Command-line entry point: solve, gen, check and bench workflows.

Exit codes: 0 on success/optimal, 2 when an iteration cap was hit, 1 on
any error. Machine-readable output (JSON or CSV) goes to stdout or the
--out path; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io_formats, oracle
from .alm import AlmConfig, alm_solve
from .apg import ApgConfig
from .pg import PgConfig, pg_solve
from .problem import (LinearProgram, StronglyConvexQP, check_box_kkt,
                      check_lp_kkt, check_scqp_kkt)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITER = 2


def _load_problem(path, kind=None):
    if path.endswith(".mps"):
        lp, report = io_formats.read_mps(path)
        return lp, {"mps": report.name, "objective_offset": report.objective_offset}
    problem, meta = io_formats.read_manifest(path)
    if kind == "lp" and not isinstance(problem, LinearProgram):
        raise io_formats.ManifestError("expected an LP manifest")
    if kind == "scqp" and not isinstance(problem, StronglyConvexQP):
        raise io_formats.ManifestError("expected an SCQP manifest")
    return problem, meta


def _start_vector(spec, n):
    if spec is None or spec == "zero":
        return np.zeros(n)
    if spec.startswith("file:"):
        arr = np.asarray(json.load(open(spec[5:])), dtype=float).ravel()
        if arr.shape != (n,):
            raise ValueError(f"start vector has length {arr.shape[0]}, expected {n}")
        return arr
    raise ValueError(f"unknown start spec {spec!r}")


def _solve_problem(problem, args):
    apg = ApgConfig()
    alm_cfg = AlmConfig(beta=args.beta, tol=args.tol, apg=apg)
    t0 = time.perf_counter()
    if isinstance(problem, LinearProgram):
        cfg = PgConfig(alpha0=args.alpha0, f_tol=args.f_tol,
                       max_pg=args.max_pg, alm=alm_cfg)
        x0 = _start_vector(args.seedable_start, problem.n)
        x, trace = pg_solve(problem, x0, cfg)
        wall_ms = 1e3 * (time.perf_counter() - t0)
        kkt = check_lp_kkt(problem, x, trace.y)
        counters = {
            "pg_iters": trace.iterations,
            "alm_outer": int(np.sum(trace.alm_outer)),
            "apg_total": int(np.sum(trace.apg_total)),
            "pas_steps_total": int(np.sum(trace.pas_total)),
            "chol_model_flops": trace.model_flops,
            "qpoases_model_flops": trace.qpoases_flops,
        }
        result = io_formats.SolveResult(
            x=x, objective=problem.objective(x),
            eq_violation=float(np.linalg.norm(problem.A @ x - problem.b)),
            kkt_stationarity=kkt.stationarity_residual,
            status=trace.status, counters=counters, wall_ms=wall_ms,
            lam=trace.y)
        return result, trace.status
    cfg = alm_cfg
    x0 = _start_vector(args.seedable_start, problem.n)
    x, lam, trace = alm_solve(problem, x0, np.zeros(problem.m), cfg)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    counters = {
        "pg_iters": 0,
        "alm_outer": trace.outer_iterations,
        "apg_total": int(np.sum(trace.apg_iters)),
        "pas_steps_total": int(np.sum(trace.pas_steps)),
        "chol_model_flops": trace.model_flops,
        "qpoases_model_flops": trace.qpoases_flops,
    }
    result = io_formats.SolveResult(
        x=x, objective=problem.objective(x),
        eq_violation=trace.eq_violation[-1],
        kkt_stationarity=trace.final_kkt.stationarity_residual,
        status=trace.status, counters=counters, wall_ms=wall_ms, lam=lam)
    return result, trace.status


def cmd_solve(args):
    problem, _ = _load_problem(args.input, args.kind)
    result, status = _solve_problem(problem, args)
    text = io_formats.result_to_json(result)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK if status == "optimal" else EXIT_MAX_ITER


def cmd_gen(args):
    if args.m < 1 or args.n < 1 or (args.kind in ("scqp",) and (args.q or 0) < 1):
        raise ValueError("invalid dimensions")
    meta = {"name": f"{args.kind}-m{args.m}-n{args.n}-s{args.seed}",
            "seed": args.seed, "generator": args.kind}
    if args.kind == "lp":
        problem = oracle.gen_random("lp", args.m, args.n, d_A=args.density,
                                    seed=args.seed)
    elif args.kind == "scqp":
        problem = oracle.gen_random("scqp", args.m, args.n, q=args.q,
                                    d_A=args.density, d_B=args.density,
                                    seed=args.seed)
    elif args.kind == "known-lp":
        inst = oracle.make_known_lp(args.m, args.n, args.seed, args.density)
        problem = inst.problem
        meta.update(x_star=inst.x_star.tolist(), lam_star=inst.lam_star.tolist(),
                    s_star=inst.s_star.tolist())
    elif args.kind == "known-scqp":
        inst = oracle.make_known_scqp(args.m, args.n, args.seed, args.density,
                                      q=args.q)
        problem = inst.problem
        meta.update(x_star=inst.x_star.tolist(), lam_star=inst.lam_star.tolist(),
                    s_star=inst.s_star.tolist())
    else:
        raise ValueError(f"unknown kind {args.kind!r}")
    io_formats.write_manifest(problem, args.out, metadata=meta)
    print(json.dumps({"written": args.out, "m": args.m, "n": args.n}))
    return EXIT_OK


def cmd_check(args):
    problem, meta = _load_problem(args.input)
    result = io_formats.read_result(args.solution)
    x = result.x
    if result.lam is None:
        raise ValueError("solution file lacks multipliers; cannot check duals")
    if isinstance(problem, LinearProgram):
        report = check_lp_kkt(problem, x, result.lam)
    else:
        report = check_scqp_kkt(problem, x, result.lam)
    doc = {
        "stationarity_residual": report.stationarity_residual,
        "eq_violation": report.eq_violation,
        "min_x": report.min_x,
        "complementarity": report.complementarity,
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    ok = (report.stationarity_residual <= args.tol
          and report.eq_violation <= args.tol
          and report.complementarity <= args.tol
          and report.min_x >= -args.tol)
    return EXIT_OK if ok else EXIT_ERROR


def _bench_specs(args):
    specs = []
    if args.suite.startswith("dir:"):
        directory = args.suite[4:]
        for fname in sorted(os.listdir(directory)):
            if fname.endswith(".json") or fname.endswith(".mps"):
                specs.append(("file", os.path.join(directory, fname), None))
        return specs
    sizes = []
    for chunk in args.sizes.split(";"):
        parts = [p for p in chunk.split(",") if p]
        if not parts:
            continue
        vals = dict(m=int(parts[0]), n=int(parts[1]))
        if len(parts) > 2:
            vals["q"] = int(parts[2])
        if len(parts) > 3:
            vals["density"] = float(parts[3])
        sizes.append(vals)
    for size in sizes:
        for seed in range(args.seeds):
            specs.append((args.suite, size, seed))
    return specs


def _bench_row(spec, args):
    suite, payload, seed = spec
    try:
        reference = None
        if suite == "file":
            problem, meta = _load_problem(payload)
            name = os.path.basename(payload)
            if isinstance(meta, dict) and "x_star" in meta:
                reference = problem.objective(np.asarray(meta["x_star"]))
        elif suite == "random-lp":
            problem = oracle.gen_random("lp", payload["m"], payload["n"],
                                        d_A=payload.get("density", 0.5), seed=seed)
            name = f"random-lp-{payload['m']}x{payload['n']}-s{seed}"
        elif suite == "random-scqp":
            problem = oracle.gen_random("scqp", payload["m"], payload["n"],
                                        q=payload.get("q", payload["n"]),
                                        d_A=payload.get("density", 0.5),
                                        d_B=payload.get("density", 0.5), seed=seed)
            name = f"random-scqp-{payload['m']}x{payload['n']}-s{seed}"
        elif suite == "known":
            inst = oracle.make_known_scqp(payload["m"], payload["n"], seed,
                                          payload.get("density", 0.5),
                                          q=payload.get("q"))
            problem = inst.problem
            reference = problem.objective(inst.x_star)
            name = f"known-scqp-{payload['m']}x{payload['n']}-s{seed}"
        else:
            raise ValueError(f"unknown suite {suite!r}")
        result, _ = _solve_problem(problem, args)
        gap = "" if reference is None else abs(result.objective - reference)
        flops = result.counters["chol_model_flops"]
        qflops = result.counters["qpoases_model_flops"]
        ratio = flops / qflops if qflops else ""
        return [name, getattr(problem, "m", ""), problem.n, result.status,
                f"{result.wall_ms:.3f}", f"{result.eq_violation:.3e}",
                gap, result.counters["pas_steps_total"], flops, qflops, ratio]
    except Exception as exc:  # keep the run going, record the failure
        label = payload if suite == "file" else f"{suite}-s{seed}"
        return [str(label), "", "", f"error: {exc}", "", "", "", "", "", "", ""]


BENCH_HEADER = ["problem", "m", "n", "status", "wall_ms", "eq_violation",
                "objective_gap_vs_reference", "pas_steps",
                "chol_model_flops", "qpoases_model_flops", "flop_ratio"]


def cmd_bench(args):
    specs = _bench_specs(args)
    workers = max(1, int(os.environ.get("QPAS_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda s: _bench_row(s, args), specs))
    else:
        rows = [_bench_row(s, args) for s in specs]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(BENCH_HEADER)
    writer.writerows(rows)
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="qpas",
                                     description="LP/SCQP solver toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=["lp", "scqp"], default=None)
    p.add_argument("--alpha0", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--f-tol", dest="f_tol", type=float, default=None)
    p.add_argument("--max-pg", dest="max_pg", type=int, default=1000)
    p.add_argument("--seedable-start", dest="seedable_start", default="zero")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen", help="generate a problem manifest")
    p.add_argument("--kind", required=True,
                   choices=["lp", "scqp", "known-lp", "known-scqp"])
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check", help="check a solution against a problem")
    p.add_argument("--input", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="run a benchmark suite to CSV")
    p.add_argument("--suite", required=True)
    p.add_argument("--sizes", default="20,60")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--out", default=None)
    p.add_argument("--alpha0", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--f-tol", dest="f_tol", type=float, default=None)
    p.add_argument("--max-pg", dest="max_pg", type=int, default=1000)
    p.add_argument("--seedable-start", dest="seedable_start", default="zero")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
