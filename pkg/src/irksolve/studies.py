"""Experiment drivers: convergence tables, preconditioner and partition
studies, and reconciliation of instrumented block-operation counts with
the closed-form cost model."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .blocks import OpCounter
from .krylov import GmresConfig
from .precond import (ilu0_factorize, build_stage_matrix,
                      stage_coupled_factorize, stage_uncoupled_factorize)
from .problems import SemidiscreteProblem
from .stage_system import StageOperator, UntransformedOperator
from .stepper import (IntegrateResult, NewtonConfig, NewtonError, PrecondSpec,
                      integrate)
from .tableaux import ButcherTableau, builtin_tableau, derive


def rate(errors, dts):
    """Observed convergence rates from adjacent (error, dt) pairs.

    r_i = log(E_{i+1} / E_i) / log(dt_{i+1} / dt_i); a nonpositive error
    yields NaN for the affected entries rather than an exception.
    """
    errors = list(errors)
    dts = list(dts)
    if len(errors) != len(dts) or len(errors) < 2:
        raise ValueError("need equally long error/dt lists with at least 2 entries")
    if any(dt <= 0 for dt in dts):
        raise ValueError("step sizes must be positive")
    out = []
    for i in range(len(errors) - 1):
        e0, e1 = errors[i], errors[i + 1]
        if e0 <= 0 or e1 <= 0:
            out.append(float("nan"))
        else:
            out.append(math.log(e1 / e0) / math.log(dts[i + 1] / dts[i]))
    return out


@dataclass
class ConvergenceRow:
    dt: float
    error_inf: float
    rate: float  # NaN on the first row
    wall_time: float
    failed: bool = False


@dataclass
class ConvergenceStudy:
    rows: dict            # scheme name -> list[ConvergenceRow]
    error_ratios: dict    # (numerator, denominator) -> list per dt

    def observed_order(self, scheme: str) -> float:
        """Rate from the two finest step sizes."""
        good = [r for r in self.rows[scheme] if not r.failed]
        if len(good) < 2:
            return float("nan")
        return good[-1].rate

    def ratio_at_smallest_dt(self, numerator: str, denominator: str) -> float:
        ratios = self.error_ratios.get((numerator, denominator))
        if not ratios:
            return float("nan")
        return ratios[-1]


_RATIO_PAIRS = (("DIRK33", "RADAU23"), ("ESDIRK65", "RADAU35"))


def run_convergence_study(problem: SemidiscreteProblem, schemes, dts,
                          t0: float = 0.0, t1: float = 1.0,
                          newton_cfg: NewtonConfig | None = None,
                          gmres_cfg: GmresConfig | None = None,
                          precond: PrecondSpec | None = None,
                          reference=None) -> ConvergenceStudy:
    """L-infinity error at t1 per (scheme, dt), with rates and the
    DIRK-versus-Radau error ratios at matching step sizes.

    ``reference`` overrides problem.exact(t1) as the truth vector (used
    for temporal studies against a fine-step reference trajectory).
    """
    truth = reference if reference is not None else problem.exact(t1)
    if truth is None:
        raise ValueError(f"{problem.name} has no exact solution at t={t1}")
    truth = np.asarray(truth, dtype=np.float64)
    rows = {}
    for scheme in schemes:
        name = scheme if isinstance(scheme, str) else scheme.name
        scheme_rows = []
        errors, used_dts = [], []
        for dt in dts:
            start = time.perf_counter()
            try:
                res = integrate(problem, scheme, t0, t1, dt, precond=precond,
                                newton_cfg=newton_cfg, gmres_cfg=gmres_cfg,
                                keep_trajectory=False)
                err = float(np.linalg.norm(res.u_final - truth, np.inf))
                scheme_rows.append(ConvergenceRow(
                    dt=dt, error_inf=err, rate=float("nan"),
                    wall_time=time.perf_counter() - start))
                errors.append(err)
                used_dts.append(dt)
            except NewtonError:
                scheme_rows.append(ConvergenceRow(
                    dt=dt, error_inf=float("nan"), rate=float("nan"),
                    wall_time=time.perf_counter() - start, failed=True))
        if len(errors) >= 2:
            rs = rate(errors, used_dts)
            j = 0
            for row in scheme_rows:
                if not row.failed:
                    if j >= 1:
                        row.rate = rs[j - 1]
                    j += 1
        rows[name] = scheme_rows
    ratios = {}
    for num, den in _RATIO_PAIRS:
        if num in rows and den in rows:
            pair = []
            for rn, rd in zip(rows[num], rows[den]):
                if rn.failed or rd.failed or rd.error_inf == 0:
                    pair.append(float("nan"))
                else:
                    pair.append(rn.error_inf / rd.error_inf)
            ratios[(num, den)] = pair
    return ConvergenceStudy(rows=rows, error_ratios=ratios)


@dataclass
class StudyRecord:
    scheme: str
    precond: str
    partitions: int | None
    dt: float
    gmres_iters_avg: float
    equivalent_mults_avg: float
    newton_iters_avg: float
    counters: dict
    wall_time: float
    converged: bool = True

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "precond": self.precond,
            "partitions": self.partitions,
            "dt": self.dt,
            "gmres_iters_avg": self.gmres_iters_avg,
            "equivalent_mults_avg": self.equivalent_mults_avg,
            "newton_iters_avg": self.newton_iters_avg,
            "counters": self.counters,
            "wall_time": self.wall_time,
            "converged": self.converged,
        }


def _record_from_result(res: IntegrateResult, scheme: str, precond: str,
                        partitions, dt: float, wall: float,
                        converged: bool = True) -> StudyRecord:
    return StudyRecord(scheme=scheme, precond=precond, partitions=partitions,
                       dt=dt, gmres_iters_avg=res.gmres_iters_avg,
                       equivalent_mults_avg=res.equivalent_mults_avg,
                       newton_iters_avg=res.newton_iters_avg,
                       counters=res.counter.snapshot(), wall_time=wall,
                       converged=converged)


def run_precond_study(problem: SemidiscreteProblem, schemes, dts, preconds,
                      num_steps: int = 5, t0: float = 0.0,
                      newton_cfg: NewtonConfig | None = None,
                      gmres_cfg: GmresConfig | None = None) -> list:
    """Fixed step count (default 5) per configuration; one record per
    (scheme, preconditioner kind, dt)."""
    records = []
    for scheme in schemes:
        name = scheme if isinstance(scheme, str) else scheme.name
        for kind in preconds:
            for dt in dts:
                spec = PrecondSpec(kind=kind)
                start = time.perf_counter()
                try:
                    res = integrate(problem, scheme, t0, t0 + num_steps * dt, dt,
                                    precond=spec, newton_cfg=newton_cfg,
                                    gmres_cfg=gmres_cfg, keep_trajectory=False)
                    records.append(_record_from_result(
                        res, name, kind, None, dt, time.perf_counter() - start))
                except NewtonError:
                    records.append(StudyRecord(
                        scheme=name, precond=kind, partitions=None, dt=dt,
                        gmres_iters_avg=float("nan"),
                        equivalent_mults_avg=float("nan"),
                        newton_iters_avg=float("nan"), counters={},
                        wall_time=time.perf_counter() - start, converged=False))
    return records


def run_partition_study(problem: SemidiscreteProblem, scheme, dt: float,
                        partition_counts, stage_parallel: bool = False,
                        precond_kind: str = "uncoupled", num_steps: int = 5,
                        t0: float = 0.0,
                        newton_cfg: NewtonConfig | None = None,
                        gmres_cfg: GmresConfig | None = None) -> list:
    """GMRES iteration counts versus partition count P.

    With ``stage_parallel`` the s per-stage tasks each take one worker,
    so P total workers leaves P/s partitions (P must divide by s).
    """
    tab = scheme if isinstance(scheme, ButcherTableau) else builtin_tableau(scheme)
    records = []
    for P in partition_counts:
        if P < 1 or P > problem.graph.num_elements:
            raise ValueError(f"partition count {P} outside [1, {problem.graph.num_elements}]")
        if stage_parallel:
            if P % tab.s != 0:
                raise ValueError(
                    f"worker count {P} not divisible by stage count {tab.s}")
            spec = PrecondSpec(kind=precond_kind, partitions=P // tab.s,
                               stage_parallel=True)
        else:
            spec = PrecondSpec(kind=precond_kind, partitions=P)
        start = time.perf_counter()
        try:
            res = integrate(problem, tab, t0, t0 + num_steps * dt, dt,
                            precond=spec, newton_cfg=newton_cfg,
                            gmres_cfg=gmres_cfg, keep_trajectory=False)
            records.append(_record_from_result(
                res, tab.name, precond_kind, P, dt,
                time.perf_counter() - start))
        except NewtonError:
            records.append(StudyRecord(
                scheme=tab.name, precond=precond_kind, partitions=P, dt=dt,
                gmres_iters_avg=float("nan"), equivalent_mults_avg=float("nan"),
                newton_iters_avg=float("nan"), counters={},
                wall_time=time.perf_counter() - start, converged=False))
    return records


@dataclass
class CostRow:
    operation: str
    measured: int
    predicted: int          # structurally exact count for the implemented algorithm
    model: int | None       # closed-form cost-model value (None when not modeled)

    @property
    def match(self) -> bool:
        return self.measured == self.predicted

    @property
    def model_match(self) -> bool | None:
        return None if self.model is None else self.measured == self.model


def cost_report(problem: SemidiscreteProblem, scheme, dt: float = 0.1) -> list:
    """Measured block-operation counts for one apply/factorize of every
    operator variant, against exact predictions and the closed-form
    model in (s, r, T) terms.  Meaningful on uniform-degree meshes."""
    tab = scheme if isinstance(scheme, ButcherTableau) else builtin_tableau(scheme)
    der = derive(tab)
    s = tab.s
    graph = problem.graph
    T = graph.num_elements
    edges = sum(len(a) for a in graph.adjacency)
    if edges % T:
        raise ValueError("cost model requires a uniform-degree mesh")
    r = edges // T
    nnzb = graph.num_blocks()
    upper = sum(1 for i in range(T) for j in graph.adjacency[i] if j > i)

    mass = problem.mass()
    u = problem.initial_state()
    jac = problem.jacobian(0.0, u)
    jacs = [jac.copy() for _ in range(s)]
    op = StageOperator(der, dt, mass, jacs)
    un_op = UntransformedOperator(tab, dt, mass, jacs)
    rng = np.random.default_rng(12345)
    w = rng.standard_normal(op.total_dim)

    rows = []

    c = OpCounter()
    op.matvec(w, c)
    rows.append(CostRow("transformed-matvec jacobian products",
                        c.jacobian_multiplies, s * nnzb, s * (r + 1) * T))
    rows.append(CostRow("transformed-matvec mass products",
                        c.mass_multiplies, s * s * T, (s * s - s) * T))

    c = OpCounter()
    un_op.matvec(w, c)
    rows.append(CostRow("untransformed-matvec jacobian products",
                        c.jacobian_multiplies, s * s * nnzb, s * s * (r + 1) * T))
    rows.append(CostRow("untransformed-matvec mass products",
                        c.mass_multiplies, s * T, None))

    dirk_mat = build_stage_matrix(1.0, mass, jac, dt)
    c = OpCounter()
    dirk_mat.matvec(w[:dirk_mat.n], c)
    rows.append(CostRow("dirk-matvec block products",
                        c.block_multiplies, nnzb, (r + 1) * T))

    c = OpCounter()
    coupled = stage_coupled_factorize(op, c)
    rows.append(CostRow("coupled-factorize block LU",
                        c.block_factorizations, s * T, s * T))
    rows.append(CostRow("coupled-factorize block products",
                        c.block_multiplies, 2 * s * upper + (s * s - s) * T,
                        s * (r + s) * T))
    c = OpCounter()
    coupled.apply(w, c)
    rows.append(CostRow("coupled-apply block products",
                        c.block_multiplies,
                        s * (nnzb - T) + (s * s - s) * T + s * T,
                        s * (r + s) * T))

    c = OpCounter()
    uncoupled = stage_uncoupled_factorize(op, der.shifts, c)
    rows.append(CostRow("uncoupled-factorize block LU",
                        c.block_factorizations, s * T, s * T))
    rows.append(CostRow("uncoupled-factorize block products",
                        c.block_multiplies, 2 * s * upper, s * r * T))
    c = OpCounter()
    uncoupled.apply(w, c)
    rows.append(CostRow("uncoupled-apply block products",
                        c.block_multiplies, s * nnzb, s * (r + 1) * T))

    c = OpCounter()
    dirk_fac = ilu0_factorize(dirk_mat.copy(), c)
    rows.append(CostRow("dirk-factorize block LU",
                        c.block_factorizations, T, T))
    rows.append(CostRow("dirk-factorize block products",
                        c.block_multiplies, 2 * upper, r * T))
    c = OpCounter()
    dirk_fac.apply(w[:dirk_mat.n], c)
    rows.append(CostRow("dirk-apply block products",
                        c.block_multiplies, nnzb, (r + 1) * T))

    rows.append(CostRow("memory blocks: stage Jacobians",
                        s * nnzb, s * nnzb, s * (r + 1) * T))
    rows.append(CostRow("memory blocks: coupled preconditioner",
                        coupled.memory_blocks(), s * nnzb + (s * s - s) * T,
                        s * (r + s) * T))
    rows.append(CostRow("memory blocks: uncoupled preconditioner",
                        uncoupled.memory_blocks(), s * nnzb, s * (r + 1) * T))
    rows.append(CostRow("memory blocks: dirk preconditioner",
                        nnzb, nnzb, (r + 1) * T))
    return rows
