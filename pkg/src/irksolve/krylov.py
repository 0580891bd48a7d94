"""Preconditioned GMRES and the equivalent-multiplications accounting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GmresConfig:
    rel_tol: float = 1e-5
    max_iters: int = 500
    restart: int | None = None  # None = full (unrestarted) GMRES
    left_precondition: bool = True

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class GmresStats:
    iterations: int = 0
    operator_applies: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    final_true_residual: float = np.nan


def _identity(v):
    return v


def gmres(apply_operator, apply_precond, rhs: np.ndarray,
          cfg: GmresConfig | None = None) -> tuple[np.ndarray, GmresStats]:
    """Left-preconditioned GMRES with modified Gram-Schmidt Arnoldi.

    Stops when the preconditioned residual norm drops below
    ``rel_tol * ||P^-1 b||``.  One reorthogonalization pass is taken when
    the MGS projection removes most of the vector's norm.  A happy
    breakdown (tiny Arnoldi vector) is treated as convergence.
    """
    cfg = cfg or GmresConfig()
    if apply_precond is None:
        apply_precond = _identity
    if not cfg.left_precondition:
        return _gmres_right(apply_operator, apply_precond, rhs, cfg)

    stats = GmresStats()
    n = len(rhs)
    x = np.zeros(n)
    if not np.any(rhs):
        stats.converged = True
        stats.final_true_residual = 0.0
        return x, stats

    pb = apply_precond(rhs)
    b_norm = np.linalg.norm(pb)
    r = apply_precond(rhs - apply_operator(x))
    stats.operator_applies += 1
    beta = np.linalg.norm(r)
    stats.residual_history.append(beta)
    tol_abs = cfg.rel_tol * b_norm
    if beta <= tol_abs:
        stats.converged = True
        stats.final_true_residual = float(np.linalg.norm(rhs - apply_operator(x)))
        return x, stats

    restart = cfg.restart or cfg.max_iters
    total_iters = 0
    while total_iters < cfg.max_iters:
        cycle = min(restart, cfg.max_iters - total_iters)
        V = np.zeros((cycle + 1, n))
        H = np.zeros((cycle + 1, cycle))
        cs = np.zeros(cycle)
        sn = np.zeros(cycle)
        g = np.zeros(cycle + 1)
        V[0] = r / beta
        g[0] = beta
        j_done = 0
        breakdown = False
        for j in range(cycle):
            w = apply_precond(apply_operator(V[j]))
            stats.operator_applies += 1
            norm_before = np.linalg.norm(w)
            for i in range(j + 1):
                H[i, j] = np.dot(V[i], w)
                w -= H[i, j] * V[i]
            # reorthogonalize when cancellation ate the vector
            if np.linalg.norm(w) < 1e-8 * norm_before:
                for i in range(j + 1):
                    corr = np.dot(V[i], w)
                    H[i, j] += corr
                    w -= corr * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] > 1e-14 * max(b_norm, 1.0):
                V[j + 1] = w / H[j + 1, j]
            else:
                breakdown = True
            # apply accumulated Givens rotations to the new column
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j] = H[j, j] / denom if denom else 1.0
            sn[j] = H[j + 1, j] / denom if denom else 0.0
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total_iters += 1
            j_done = j + 1
            res = abs(g[j + 1])
            stats.residual_history.append(res)
            if res <= tol_abs or breakdown or total_iters >= cfg.max_iters:
                break
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), g[:j_done])
        x = x + V[:j_done].T @ y
        r = apply_precond(rhs - apply_operator(x))
        beta = np.linalg.norm(r)
        if stats.residual_history[-1] <= tol_abs or breakdown:
            stats.converged = True
            break
    stats.iterations = total_iters
    stats.final_true_residual = float(np.linalg.norm(rhs - apply_operator(x)))
    return x, stats


def _gmres_right(apply_operator, apply_precond, rhs, cfg):
    """Right-preconditioned variant: solve (B P^-1) u = b, x = P^-1 u."""
    stats = GmresStats()
    n = len(rhs)
    if not np.any(rhs):
        stats.converged = True
        stats.final_true_residual = 0.0
        return np.zeros(n), stats

    def op(u):
        return apply_operator(apply_precond(u))

    inner_cfg = GmresConfig(rel_tol=cfg.rel_tol, max_iters=cfg.max_iters,
                            restart=cfg.restart, left_precondition=True)
    u, stats = gmres(op, None, rhs, inner_cfg)
    x = apply_precond(u)
    stats.final_true_residual = float(np.linalg.norm(rhs - apply_operator(x)))
    return x, stats


def equivalent_multiplications(stats: GmresStats, s_implicit: int, is_irk: bool) -> int:
    """GMRES iterations normalized to single-Jacobian-sized matvec counts.

    DIRK: iterations times the implicit stage count (the caller sums over
    the s separate stage solves).  IRK: each big matvec is s
    Jacobian-sized products, so iterations times s.  Both rules multiply
    by ``s_implicit``; ``is_irk`` documents which reading applies.
    """
    del is_irk
    return stats.iterations * s_implicit
