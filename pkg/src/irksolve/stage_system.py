"""Stage operators for the transformed and untransformed IRK Newton systems.

Transformed: B = A^-1 (x) M - dt blkdiag(J_1..J_s); each matvec costs s
Jacobian-pattern sweeps plus s^2 mass-block sweeps.  Untransformed: the
reference formulation with the Jacobian pattern repeated s x s times.
Stage vectors are stage-major: all of stage 1, then stage 2, ...
"""

from __future__ import annotations

import numpy as np

from .blocks import BlockDiagonalMatrix, BlockSparseMatrix, OpCounter
from .tableaux import ButcherTableau, TableauDerived


def _check_stage_setup(mass, jacobians):
    graph = jacobians[0].graph
    m = jacobians[0].m
    for J in jacobians[1:]:
        if J.graph is not graph or J.m != m:
            raise ValueError("all stage Jacobians must share one graph and block size")
    if mass.T_elems != graph.num_elements or mass.m != m:
        raise ValueError("mass matrix dimensions do not match the Jacobians")


class StageOperator:
    """B = A^-1 (x) M - dt blkdiag(J_1, ..., J_s)."""

    def __init__(self, derived: TableauDerived, dt: float,
                 mass: BlockDiagonalMatrix, jacobians: list[BlockSparseMatrix]):
        if len(jacobians) != derived.a_inv.shape[0]:
            raise ValueError("number of Jacobians must equal the stage count")
        _check_stage_setup(mass, jacobians)
        self.derived = derived
        self.dt = dt
        self.mass = mass
        self.jacobians = jacobians

    @property
    def s(self) -> int:
        return len(self.jacobians)

    @property
    def n(self) -> int:
        return self.mass.n

    @property
    def total_dim(self) -> int:
        return self.s * self.n

    def matvec(self, w: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
        if w.shape != (self.total_dim,):
            raise ValueError(f"expected vector of length {self.total_dim}, got {w.shape}")
        s, n = self.s, self.n
        a_inv = self.derived.a_inv
        wb = w.reshape(s, n)
        y = np.empty((s, n))
        for k in range(s):
            acc = -self.dt * self.jacobians[k].matvec(wb[k])
            # one mass sweep per (k, l) pair, including the diagonal terms
            for l in range(s):
                acc += a_inv[k, l] * self.mass.matvec(wb[l])
            y[k] = acc
        if counter is not None:
            jac = sum(J.nnz_blocks for J in self.jacobians)
            counter.jacobian_multiplies += jac
            counter.mass_multiplies += s * s * self.mass.T_elems
            counter.block_multiplies += jac + s * s * self.mass.T_elems
        return y.ravel()

    def to_dense(self) -> np.ndarray:
        """Dense Kronecker assembly (test oracle use only)."""
        s, n = self.s, self.n
        out = np.kron(self.derived.a_inv, self.mass.to_dense())
        for k in range(s):
            out[k * n:(k + 1) * n, k * n:(k + 1) * n] -= self.dt * self.jacobians[k].to_dense()
        return out


class UntransformedOperator:
    """I (x) M - dt (a_kl J_k) on the stacked stage vector K."""

    def __init__(self, tableau: ButcherTableau, dt: float,
                 mass: BlockDiagonalMatrix, jacobians: list[BlockSparseMatrix]):
        if len(jacobians) != tableau.s:
            raise ValueError("number of Jacobians must equal the stage count")
        _check_stage_setup(mass, jacobians)
        self.tableau = tableau
        self.dt = dt
        self.mass = mass
        self.jacobians = jacobians

    @property
    def s(self) -> int:
        return len(self.jacobians)

    @property
    def n(self) -> int:
        return self.mass.n

    @property
    def total_dim(self) -> int:
        return self.s * self.n

    def matvec(self, kvec: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
        if kvec.shape != (self.total_dim,):
            raise ValueError(f"expected vector of length {self.total_dim}, got {kvec.shape}")
        s, n = self.s, self.n
        A = self.tableau.A
        kb = kvec.reshape(s, n)
        y = np.empty((s, n))
        for i in range(s):
            acc = self.mass.matvec(kb[i])
            for j in range(s):
                acc -= self.dt * A[i, j] * self.jacobians[i].matvec(kb[j])
            y[i] = acc
        if counter is not None:
            jac = s * sum(J.nnz_blocks for J in self.jacobians)
            counter.jacobian_multiplies += jac
            counter.mass_multiplies += s * self.mass.T_elems
            counter.block_multiplies += jac + s * self.mass.T_elems
        return y.ravel()

    def to_dense(self) -> np.ndarray:
        s, n = self.s, self.n
        out = np.kron(np.eye(s), self.mass.to_dense())
        for i in range(s):
            Ji = self.jacobians[i].to_dense()
            for j in range(s):
                out[i * n:(i + 1) * n, j * n:(j + 1) * n] -= self.dt * self.tableau.A[i, j] * Ji
        return out


def k_to_w(tab: ButcherTableau, k: np.ndarray) -> np.ndarray:
    """w = (A (x) I) k."""
    s = tab.s
    if len(k) % s != 0:
        raise ValueError(f"vector length {len(k)} not divisible by s={s}")
    kb = k.reshape(s, -1)
    return (tab.A @ kb).ravel()


def w_to_k(derived: TableauDerived, w: np.ndarray) -> np.ndarray:
    """k = (A^-1 (x) I) w."""
    s = derived.a_inv.shape[0]
    if len(w) % s != 0:
        raise ValueError(f"vector length {len(w)} not divisible by s={s}")
    wb = w.reshape(s, -1)
    return (derived.a_inv @ wb).ravel()
