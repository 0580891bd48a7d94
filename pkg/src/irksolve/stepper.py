"""Newton-Krylov time steppers.

Three step kernels share one Newton skeleton: the transformed
fully-implicit step (stage operator A^-1 (x) M - dt blkdiag(J)), the
untransformed reference step on the stacked stage derivatives, and the
sequential DIRK step.  A fixed-step integrate() loop aggregates solver
statistics across steps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockDiagonalMatrix, OpCounter
from .krylov import GmresConfig, GmresStats, gmres, equivalent_multiplications
from .meshing import partition
from .precond import (build_stage_matrix, ilu0_factorize,
                      stage_coupled_factorize, stage_uncoupled_factorize)
from .problems import SemidiscreteProblem
from .stage_system import StageOperator, UntransformedOperator
from .tableaux import ButcherTableau, SchemeKind, builtin_tableau, derive


@dataclass
class NewtonConfig:
    abs_tol_inf: float = 1e-8
    max_iters: int = 50

    def __post_init__(self):
        if self.abs_tol_inf <= 0:
            raise ValueError("abs_tol_inf must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class PrecondSpec:
    """Preconditioner selection for the transformed fully-implicit step.

    kinds: coupled, coupled-literal, uncoupled, uncoupled-unshifted,
    block-jacobi, none.  ``partitions`` restricts the ILU pattern to
    contiguous element ranges; ``stage_parallel`` runs the uncoupled
    per-stage factor/apply tasks on a thread pool.
    """

    kind: str = "coupled"
    partitions: int | None = None
    stage_parallel: bool = False
    workers: int | None = None

    KINDS = ("coupled", "coupled-literal", "uncoupled", "uncoupled-unshifted",
             "block-jacobi", "none")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown preconditioner kind {self.kind!r}")


@dataclass
class StepResult:
    u_next: np.ndarray
    newton_iterations: int
    gmres_stats: list
    equivalent_mults_avg: float


class NewtonError(RuntimeError):
    """Newton failed to reach tolerance; carries the residual history."""

    def __init__(self, residual_history: list):
        self.residual_history = residual_history
        super().__init__(
            f"Newton did not converge in {len(residual_history) - 1} iterations"
            f" (last residual {residual_history[-1]:.3e})")


def _partition_map(problem: SemidiscreteProblem, partitions: int | None):
    if partitions is None:
        return None
    return partition(problem.graph, partitions).partition_of


def _make_preconditioner(op: StageOperator, spec: PrecondSpec,
                         part, counter: OpCounter | None):
    if spec.kind == "none":
        return None
    workers = spec.workers or (op.s if spec.stage_parallel else 1)
    if spec.kind in ("coupled", "coupled-literal"):
        fac = stage_coupled_factorize(op, counter, partition_of=part,
                                      literal_update=spec.kind == "coupled-literal")
    elif spec.kind == "block-jacobi":
        T = op.jacobians[0].T_elems
        fac = stage_uncoupled_factorize(op, op.derived.shifts, counter,
                                        partition_of=np.arange(T), workers=workers)
    elif spec.kind == "uncoupled":
        fac = stage_uncoupled_factorize(op, op.derived.shifts, counter,
                                        partition_of=part, workers=workers)
    else:
        fac = stage_uncoupled_factorize(op, None, counter,
                                        partition_of=part, workers=workers)
    return fac


def _newton(compute_residual, solve_correction, x: np.ndarray,
            newton_cfg: NewtonConfig):
    """Shared Newton skeleton.

    Convergence is checked after at least one correction, so an already
    converged state still records one (trivial) iteration.
    """
    gstats: list[GmresStats] = []
    history = []
    it = 0
    while True:
        r = compute_residual(x)
        rn = float(np.linalg.norm(r, np.inf))
        history.append(rn)
        if it >= 1 and rn <= newton_cfg.abs_tol_inf:
            return x, it, gstats, history
        if it >= newton_cfg.max_iters:
            raise NewtonError(history)
        dx, stats = solve_correction(x, -r)
        gstats.append(stats)
        x = x + dx
        it += 1


def irk_step_transformed(problem: SemidiscreteProblem, tab: ButcherTableau,
                         u0: np.ndarray, t0: float, dt: float,
                         precond: PrecondSpec | None = None,
                         newton_cfg: NewtonConfig | None = None,
                         gmres_cfg: GmresConfig | None = None,
                         counter: OpCounter | None = None) -> StepResult:
    """One step of a fully implicit scheme on the transformed stage system.

    Unknowns are the stage combinations w_k = sum_l a_kl k_l; the Newton
    linearization is the Kronecker-structured stage operator, and the
    update collapses to u0 + dt w_s for stiffly accurate tableaux.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if tab.kind is not SchemeKind.FULLY_IMPLICIT:
        raise ValueError(f"{tab.name} is not fully implicit")
    precond = precond or PrecondSpec()
    newton_cfg = newton_cfg or NewtonConfig()
    gmres_cfg = gmres_cfg or GmresConfig()
    der = derive(tab)
    s, n = tab.s, len(u0)
    mass = problem.mass()
    part = _partition_map(problem, precond.partitions)
    stage_times = t0 + dt * tab.c

    def compute_residual(w):
        wb = w.reshape(s, n)
        mw = np.stack([mass.matvec(wb[l]) for l in range(s)])
        res = der.a_inv @ mw
        for k in range(s):
            res[k] -= problem.rhs(stage_times[k], u0 + dt * wb[k])
        return res.ravel()

    def solve_correction(w, rhs):
        wb = w.reshape(s, n)
        jacs = [problem.jacobian(stage_times[k], u0 + dt * wb[k]) for k in range(s)]
        op = StageOperator(der, dt, mass, jacs)
        fac = _make_preconditioner(op, precond, part, counter)
        apply_pre = None if fac is None else (lambda v: fac.apply(v, counter))
        return gmres(lambda v: op.matvec(v, counter), apply_pre, rhs, gmres_cfg)

    w0 = np.zeros(s * n)
    w, iters, gstats, _ = _newton(compute_residual, solve_correction, w0, newton_cfg)
    wb = w.reshape(s, n)
    bta = der.bT_a_inv
    e_last = np.zeros(s)
    e_last[-1] = 1.0
    if np.linalg.norm(bta - e_last, np.inf) <= 1e-12:
        u1 = u0 + dt * wb[-1]
    else:
        u1 = u0 + dt * (bta @ wb)
    eq = [equivalent_multiplications(st, s, is_irk=True) for st in gstats]
    return StepResult(u_next=u1, newton_iterations=iters, gmres_stats=gstats,
                      equivalent_mults_avg=float(np.mean(eq)) if eq else 0.0)


def irk_step_untransformed(problem: SemidiscreteProblem, tab: ButcherTableau,
                           u0: np.ndarray, t0: float, dt: float,
                           newton_cfg: NewtonConfig | None = None,
                           gmres_cfg: GmresConfig | None = None,
                           counter: OpCounter | None = None) -> StepResult:
    """Reference formulation solving directly for the stage derivatives."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    newton_cfg = newton_cfg or NewtonConfig()
    gmres_cfg = gmres_cfg or GmresConfig()
    s, n = tab.s, len(u0)
    A = tab.A
    mass = problem.mass()
    stage_times = t0 + dt * tab.c

    def stage_values(kb):
        return u0[None, :] + dt * (A @ kb)

    def compute_residual(k):
        kb = k.reshape(s, n)
        U = stage_values(kb)
        res = np.empty((s, n))
        for i in range(s):
            res[i] = mass.matvec(kb[i]) - problem.rhs(stage_times[i], U[i])
        return res.ravel()

    def solve_correction(k, rhs):
        kb = k.reshape(s, n)
        U = stage_values(kb)
        jacs = [problem.jacobian(stage_times[i], U[i]) for i in range(s)]
        op = UntransformedOperator(tab, dt, mass, jacs)
        return gmres(lambda v: op.matvec(v, counter), None, rhs, gmres_cfg)

    k0 = np.zeros(s * n)
    k, iters, gstats, _ = _newton(compute_residual, solve_correction, k0, newton_cfg)
    kb = k.reshape(s, n)
    u1 = u0 + dt * (tab.b @ kb)
    eq = [equivalent_multiplications(st, s, is_irk=True) for st in gstats]
    return StepResult(u_next=u1, newton_iterations=iters, gmres_stats=gstats,
                      equivalent_mults_avg=float(np.mean(eq)) if eq else 0.0)


def dirk_step(problem: SemidiscreteProblem, tab: ButcherTableau,
              u0: np.ndarray, t0: float, dt: float,
              newton_cfg: NewtonConfig | None = None,
              gmres_cfg: GmresConfig | None = None,
              counter: OpCounter | None = None,
              partitions: int | None = None) -> StepResult:
    """Sequential stage solves for (E)SDIRK schemes.

    Each implicit stage solves M k_i = f(t_i, u0 + dt sum_j a_ij k_j)
    by Newton, preconditioned with plain block ILU(0) of M - dt a_ii J.
    An explicit first stage is a single mass solve.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if tab.kind not in (SchemeKind.DIRK, SchemeKind.ESDIRK):
        raise ValueError(f"{tab.name} is not diagonally implicit")
    newton_cfg = newton_cfg or NewtonConfig()
    gmres_cfg = gmres_cfg or GmresConfig()
    s, n = tab.s, len(u0)
    A = tab.A
    mass = problem.mass()
    part = _partition_map(problem, partitions)
    stage_times = t0 + dt * tab.c
    k_stages = np.zeros((s, n))
    total_newton = 0
    all_stats: list[GmresStats] = []
    eq_per_stage = []

    for i in range(s):
        base = u0 + dt * (A[i, :i] @ k_stages[:i]) if i else u0.copy()
        aii = A[i, i]
        if aii == 0.0:
            # explicit stage: one mass solve, no Newton
            k_stages[i] = mass.solve(problem.rhs(stage_times[i], base), counter)
            continue

        def compute_residual(ki):
            return mass.matvec(ki) - problem.rhs(stage_times[i], base + dt * aii * ki)

        def solve_correction(ki, rhs):
            U = base + dt * aii * ki
            mat = build_stage_matrix(1.0, mass, problem.jacobian(stage_times[i], U),
                                     dt * aii)
            fac = ilu0_factorize(mat, counter, partition_of=part)
            return gmres(lambda v: mat.matvec(v, counter),
                         lambda v: fac.apply(v, counter), rhs, gmres_cfg)

        ki, iters, gstats, _ = _newton(compute_residual, solve_correction,
                                       np.zeros(n), newton_cfg)
        k_stages[i] = ki
        total_newton += iters
        all_stats.extend(gstats)
        eq = [equivalent_multiplications(st, 1, is_irk=False) for st in gstats]
        eq_per_stage.append(float(np.mean(eq)) if eq else 0.0)

    u1 = u0 + dt * (tab.b @ k_stages)
    return StepResult(u_next=u1, newton_iterations=total_newton,
                      gmres_stats=all_stats,
                      equivalent_mults_avg=float(sum(eq_per_stage)))


@dataclass
class IntegrateResult:
    times: np.ndarray
    trajectory: list
    step_results: list
    counter: OpCounter
    wall_time: float

    @property
    def u_final(self) -> np.ndarray:
        return self.trajectory[-1]

    @property
    def newton_iters_avg(self) -> float:
        if not self.step_results:
            return 0.0
        return float(np.mean([r.newton_iterations for r in self.step_results]))

    @property
    def gmres_iters_avg(self) -> float:
        solves = [st for r in self.step_results for st in r.gmres_stats]
        if not solves:
            return 0.0
        return float(np.mean([st.iterations for st in solves]))

    @property
    def equivalent_mults_avg(self) -> float:
        if not self.step_results:
            return 0.0
        return float(np.mean([r.equivalent_mults_avg for r in self.step_results]))


def _resolve_tableau(scheme) -> ButcherTableau:
    if isinstance(scheme, ButcherTableau):
        return scheme
    return builtin_tableau(scheme)


def integrate(problem: SemidiscreteProblem, scheme, t0: float, t1: float,
              dt: float, precond: PrecondSpec | None = None,
              newton_cfg: NewtonConfig | None = None,
              gmres_cfg: GmresConfig | None = None,
              formulation: str = "transformed",
              keep_trajectory: bool = True) -> IntegrateResult:
    """Fixed-step integration from t0 to t1.

    (t1 - t0) / dt must be an integer to within rounding.  DIRK-family
    tableaux dispatch to the sequential stage solver; fully implicit
    tableaux use the transformed step unless ``formulation`` says
    otherwise.
    """
    tab = _resolve_tableau(scheme)
    span = t1 - t0
    if span < 0:
        raise ValueError("t1 must not precede t0")
    num_steps = int(round(span / dt)) if span > 0 else 0
    if span > 0 and abs(num_steps * dt - span) > 1e-9 * max(abs(span), dt):
        raise ValueError(f"(t1 - t0) = {span} is not an integer multiple of dt = {dt}")

    counter = OpCounter()
    u = problem.initial_state() if hasattr(problem, "initial_state") else None
    u = np.asarray(u, dtype=np.float64)
    trajectory = [u.copy()]
    step_results = []
    start = time.perf_counter()
    for k in range(num_steps):
        t = t0 + k * dt
        if tab.kind in (SchemeKind.DIRK, SchemeKind.ESDIRK):
            res = dirk_step(problem, tab, u, t, dt, newton_cfg, gmres_cfg, counter,
                            partitions=precond.partitions if precond else None)
        elif formulation == "untransformed":
            res = irk_step_untransformed(problem, tab, u, t, dt, newton_cfg,
                                         gmres_cfg, counter)
        else:
            res = irk_step_transformed(problem, tab, u, t, dt, precond,
                                       newton_cfg, gmres_cfg, counter)
        u = res.u_next
        step_results.append(res)
        if keep_trajectory:
            trajectory.append(u.copy())
    if not keep_trajectory:
        trajectory.append(u.copy())
    wall = time.perf_counter() - start
    times = t0 + dt * np.arange(len(trajectory)) if keep_trajectory else np.array([t0, t1])
    return IntegrateResult(times=times, trajectory=trajectory,
                           step_results=step_results, counter=counter,
                           wall_time=wall)
