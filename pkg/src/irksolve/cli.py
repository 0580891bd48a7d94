"""Command-line experiment harness.

Subcommands: tableau, run, converge, precond-study, partition-study,
cost-report.  Results go to stdout or --out as JSON (nested document) or
CSV (one row per record).  Exit codes: 0 success, 2 when any
configuration failed to converge, 1 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from .dg1d import Dg1dConfig
from .krylov import GmresConfig
from .problems import (make_advection_diffusion_dg, make_linear_block_ode,
                       make_prothero_robinson, make_viscous_burgers_mms)
from .stepper import NewtonConfig, NewtonError, PrecondSpec, integrate
from .studies import (cost_report, run_convergence_study, run_partition_study,
                      run_precond_study)
from .tableaux import builtin_tableau, derive

PROBLEM_NAMES = ("linear-ode", "advection-diffusion", "burgers",
                 "prothero-robinson")

STUDY_CSV_FIELDS = ("scheme", "precond", "partitions", "dt", "gmres_iters_avg",
                    "equivalent_mults_avg", "newton_iters_avg", "wall_time",
                    "converged")


def _build_problem(args):
    if args.problem == "linear-ode":
        return make_linear_block_ode(args.elements, args.degree,
                                     (args.spectrum_min, args.spectrum_max),
                                     seed=args.seed)
    cfg_kwargs = dict(poly_degree=args.degree, elements=args.elements,
                      diffusion=args.diffusion)
    if args.problem == "advection-diffusion":
        return make_advection_diffusion_dg(Dg1dConfig(advection=args.advection,
                                                      **cfg_kwargs))
    if args.problem == "burgers":
        return make_viscous_burgers_mms(Dg1dConfig(**cfg_kwargs))
    if args.problem == "prothero-robinson":
        return make_prothero_robinson(args.stiffness)
    raise ValueError(f"unknown problem {args.problem!r}")


def _gmres_cfg(args) -> GmresConfig:
    return GmresConfig(rel_tol=args.gmres_tol, max_iters=args.gmres_maxit,
                       restart=args.gmres_restart)


def _newton_cfg(args) -> NewtonConfig:
    return NewtonConfig(abs_tol_inf=args.newton_tol)


def _emit(args, document: dict, records: list | None = None) -> None:
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=STUDY_CSV_FIELDS,
                                extrasaction="ignore")
        writer.writeheader()
        for rec in records or []:
            writer.writerow(rec.as_dict())
        text = buf.getvalue()
    else:
        text = json.dumps(document, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_tableau(args) -> int:
    tab = builtin_tableau(args.scheme)
    der = derive(tab)
    doc = {
        "name": tab.name,
        "A": tab.A.tolist(),
        "b": tab.b.tolist(),
        "c": tab.c.tolist(),
        "A_inv": der.a_inv.tolist(),
        "shifts": der.shifts.tolist(),
        "order": tab.order,
        "stage_order": tab.stage_order,
        "kind": tab.kind.name.lower(),
    }
    _emit(args, doc)
    return 0


def _cmd_run(args) -> int:
    problem = _build_problem(args)
    spec = PrecondSpec(kind=args.precond, partitions=args.partitions,
                       stage_parallel=args.stage_parallel == "on")
    start = time.perf_counter()
    try:
        res = integrate(problem, args.scheme, args.t0, args.t1, args.dt,
                        precond=spec, newton_cfg=_newton_cfg(args),
                        gmres_cfg=_gmres_cfg(args), keep_trajectory=False)
    except NewtonError as exc:
        _emit(args, {"converged": False, "residual_history": exc.residual_history})
        return 2
    doc = {
        "final_state_norm": float(np.linalg.norm(res.u_final)),
        "newton_iters_avg": res.newton_iters_avg,
        "gmres_iters_avg": res.gmres_iters_avg,
        "equivalent_mults_avg": res.equivalent_mults_avg,
        "wall_time": time.perf_counter() - start,
    }
    _emit(args, doc)
    return 0


def _cmd_converge(args) -> int:
    problem = _build_problem(args)
    dts = [args.dt_max / 2 ** i for i in range(args.levels)]
    study = run_convergence_study(problem, args.schemes, dts, t0=args.t0,
                                  t1=args.t1, newton_cfg=_newton_cfg(args),
                                  gmres_cfg=_gmres_cfg(args))
    doc = {"schemes": {}}
    failed = False
    for name, rows in study.rows.items():
        doc["schemes"][name] = [
            {"dt": r.dt, "error_inf": r.error_inf, "rate": r.rate,
             "wall_time": r.wall_time, "failed": r.failed} for r in rows]
        failed = failed or any(r.failed for r in rows)
    doc["error_ratios"] = {f"{a}/{b}": v for (a, b), v in study.error_ratios.items()}
    _emit(args, doc)
    return 2 if failed else 0


def _cmd_precond_study(args) -> int:
    problem = _build_problem(args)
    dts = [args.dt_max / 2 ** i for i in range(args.levels)]
    records = run_precond_study(problem, args.schemes, dts, args.preconds,
                                num_steps=args.steps,
                                newton_cfg=_newton_cfg(args),
                                gmres_cfg=_gmres_cfg(args))
    doc = {"records": [r.as_dict() for r in records]}
    _emit(args, doc, records)
    return 0 if all(r.converged for r in records) else 2


def _cmd_partition_study(args) -> int:
    problem = _build_problem(args)
    records = run_partition_study(problem, args.scheme, args.dt,
                                  args.partitions,
                                  stage_parallel=args.stage_parallel == "on",
                                  precond_kind=args.precond,
                                  num_steps=args.steps,
                                  newton_cfg=_newton_cfg(args),
                                  gmres_cfg=_gmres_cfg(args))
    doc = {"records": [r.as_dict() for r in records]}
    _emit(args, doc, records)
    return 0 if all(r.converged for r in records) else 2


def _cmd_cost_report(args) -> int:
    problem = _build_problem(args)
    rows = cost_report(problem, args.scheme, args.dt)
    doc = {"rows": [
        {"operation": r.operation, "measured": r.measured,
         "predicted": r.predicted, "model": r.model, "match": r.match,
         "model_match": r.model_match} for r in rows]}
    _emit(args, doc)
    return 0


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", choices=PROBLEM_NAMES, default="burgers")
    p.add_argument("--elements", type=int, default=8)
    p.add_argument("--degree", type=int, default=2,
                   help="polynomial degree (DG) or block size (linear ODE)")
    p.add_argument("--diffusion", type=float, default=0.01)
    p.add_argument("--advection", type=float, default=1.0)
    p.add_argument("--spectrum-min", type=float, default=-10.0)
    p.add_argument("--spectrum-max", type=float, default=-0.1)
    p.add_argument("--stiffness", type=float, default=-1e6)


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--newton-tol", type=float, default=1e-8)
    p.add_argument("--gmres-tol", type=float, default=1e-5)
    p.add_argument("--gmres-maxit", type=int, default=500)
    p.add_argument("--gmres-restart", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irksolve",
        description="Implicit Runge-Kutta solver experiments")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default=None)
    parser.add_argument("--format", choices=("csv", "json"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tableau", help="print tableau coefficients")
    p.add_argument("--scheme", required=True)
    p.set_defaults(func=_cmd_tableau)

    p = sub.add_parser("run", help="integrate one configuration")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--scheme", default="RADAU23")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=0.5)
    p.add_argument("--precond", choices=PrecondSpec.KINDS, default="coupled")
    p.add_argument("--partitions", type=int, default=None)
    p.add_argument("--stage-parallel", choices=("on", "off"), default="off")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("converge", help="dt sweep with observed rates")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--schemes", nargs="+", default=["RADAU23", "DIRK33"])
    p.add_argument("--dt-max", type=float, default=0.2)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=0.8)
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("precond-study", help="equivalent multiplications vs dt")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--schemes", nargs="+", default=["RADAU35"])
    p.add_argument("--preconds", nargs="+",
                   default=["coupled", "uncoupled", "uncoupled-unshifted"])
    p.add_argument("--dt-max", type=float, default=0.1)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--steps", type=int, default=5)
    p.set_defaults(func=_cmd_precond_study)

    p = sub.add_parser("partition-study", help="GMRES iterations vs partitions")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--scheme", default="RADAU35")
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--partitions", nargs="+", type=int, default=[1, 2, 4, 8])
    p.add_argument("--precond", default="uncoupled")
    p.add_argument("--stage-parallel", choices=("on", "off"), default="off")
    p.add_argument("--steps", type=int, default=5)
    p.set_defaults(func=_cmd_partition_study)

    p = sub.add_parser("cost-report", help="block-operation count reconciliation")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--scheme", default="RADAU35")
    p.add_argument("--dt", type=float, default=0.1)
    p.set_defaults(func=_cmd_cost_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
