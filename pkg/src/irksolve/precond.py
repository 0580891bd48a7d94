"""Block ILU(0) preconditioners: plain, stage-coupled, stage-uncoupled
shifted, and the partition-restricted variants that degrade to block
Jacobi when every element is its own partition."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .blocks import BlockDiagonalMatrix, BlockSparseMatrix, OpCounter
from .kernels import get_backend
from .stage_system import StageOperator


class SingularPivotError(RuntimeError):
    """A pivot block was numerically singular during factorization."""

    def __init__(self, element: int, stage: int | None = None):
        self.element = element
        self.stage = stage
        where = f"element {element}" if stage is None else f"stage {stage}, element {element}"
        super().__init__(f"numerically singular pivot block at {where}")


def partition_keep_mask(mat: BlockSparseMatrix,
                        partition_of: np.ndarray | None) -> np.ndarray:
    """True for blocks retained in the factorization pattern.

    ``partition_of`` maps each element to a partition id; blocks
    coupling elements in different partitions are dropped.  None keeps
    everything.
    """
    keep = np.ones(mat.nnz_blocks, dtype=np.bool_)
    if partition_of is None:
        return keep
    part = np.asarray(partition_of)
    if part.shape != (mat.T_elems,):
        raise ValueError(f"partition map must have length {mat.T_elems}")
    for i in range(mat.T_elems):
        for k in range(mat.indptr[i], mat.indptr[i + 1]):
            j = mat.indices[k]
            if j != i and part[i] != part[j]:
                keep[k] = False
    return keep


def build_stage_matrix(coef: float, mass: BlockDiagonalMatrix,
                       jac: BlockSparseMatrix, dt: float) -> BlockSparseMatrix:
    """coef * M - dt * J on the Jacobian pattern."""
    out = jac.scaled(-dt)
    for i in range(out.T_elems):
        out.data[out.diag_pos[i]] += coef * mass.blocks[i]
    return out


class BlockIlu0:
    """Zero-fill block LU factors of one Jacobian-pattern matrix."""

    def __init__(self, mat: BlockSparseMatrix, fdata: np.ndarray,
                 dinv: np.ndarray, keep: np.ndarray):
        self.graph = mat.graph
        self.m = mat.m
        self.indptr = mat.indptr
        self.indices = mat.indices
        self.diag_pos = mat.diag_pos
        self.fdata = fdata
        self.dinv = dinv
        self.keep = keep

    @property
    def n(self) -> int:
        return len(self.dinv) * self.m

    @property
    def num_kept_offdiag(self) -> int:
        return int(self.keep.sum()) - len(self.dinv)

    def apply(self, y: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
        if y.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {y.shape}")
        x = get_backend().ilu0_solve(self.indptr, self.indices, self.diag_pos,
                                     self.fdata, self.dinv, self.keep, y)
        if counter is not None:
            # off-diagonal products plus one inverse-diagonal product per element
            counter.block_multiplies += self.num_kept_offdiag + len(self.dinv)
        return x


def ilu0_factorize(mat: BlockSparseMatrix, counter: OpCounter | None = None,
                   partition_of: np.ndarray | None = None,
                   force_general: bool = False) -> BlockIlu0:
    """Block ILU(0); takes the simplified path whenever the graph allows it.

    Both paths produce identical factors on graphs satisfying the
    no-common-neighbor condition.
    """
    simplified = mat.graph.satisfies_simplified_ilu_condition() and not force_general
    keep = partition_keep_mask(mat, partition_of)
    fdata, dinv, fail = get_backend().ilu0_factor(
        mat.indptr, mat.indices, mat.diag_pos, mat.data, keep, simplified)
    if fail >= 0:
        raise SingularPivotError(fail)
    fac = BlockIlu0(mat, fdata, dinv, keep)
    if counter is not None:
        counter.block_factorizations += mat.T_elems
        upper = sum(1 for k in range(mat.nnz_blocks)
                    if keep[k] and mat.indices[k] > _row_of(mat, k))
        counter.block_multiplies += 2 * upper
    return fac


def _row_of(mat: BlockSparseMatrix, k: int) -> int:
    return int(np.searchsorted(mat.indptr, k, side="right") - 1)


class StageCoupledIlu0:
    """Stage-coupled block ILU(0) of the transformed operator.

    Stores s Jacobian-pattern diagonal factors plus (s^2 - s) * T
    mass-sized cross-stage coupling blocks.
    """

    def __init__(self, op: StageOperator, fstage, fcoupling, dinv, keep):
        self.s = op.s
        self.m = op.jacobians[0].m
        self.indptr = op.jacobians[0].indptr
        self.indices = op.jacobians[0].indices
        self.diag_pos = op.jacobians[0].diag_pos
        self.T_elems = op.jacobians[0].T_elems
        self.fstage = fstage
        self.fcoupling = fcoupling
        self.dinv = dinv
        self.keep = keep

    @property
    def n_total(self) -> int:
        return self.s * self.T_elems * self.m

    @property
    def num_kept_offdiag_per_stage(self) -> int:
        return int(self.keep.sum()) - self.T_elems

    @property
    def num_coupling_blocks(self) -> int:
        return (self.s * self.s - self.s) * self.T_elems

    def memory_blocks(self) -> int:
        """Stored m x m blocks: s Jacobian-pattern factors + couplings."""
        return self.s * len(self.indices) + self.num_coupling_blocks

    def apply(self, y: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
        if y.shape != (self.n_total,):
            raise ValueError(f"expected vector of length {self.n_total}, got {y.shape}")
        x = get_backend().coupled_solve(self.indptr, self.indices, self.diag_pos,
                                        self.fstage, self.fcoupling, self.dinv,
                                        self.keep, y)
        if counter is not None:
            counter.block_multiplies += (self.s * self.num_kept_offdiag_per_stage
                                         + self.num_coupling_blocks
                                         + self.s * self.T_elems)
        return x


def stage_coupled_factorize(op: StageOperator, counter: OpCounter | None = None,
                            partition_of: np.ndarray | None = None,
                            literal_update: bool = False) -> StageCoupledIlu0:
    """Stage-coupled ILU(0): per-stage simplified ILU sweeps plus
    cross-stage elementwise Schur updates.

    ``literal_update`` switches the cross-stage update to the printed
    form B_ll -= B_lk B_kk; the default uses the upper coupling block
    B_kl = (A^-1)_kl M.
    """
    J0 = op.jacobians[0]
    s, T, m = op.s, J0.T_elems, J0.m
    a_inv = op.derived.a_inv
    stage_data = np.empty((s, J0.nnz_blocks, m, m))
    for k in range(s):
        stage_data[k] = build_stage_matrix(a_inv[k, k], op.mass,
                                           op.jacobians[k], op.dt).data
    coupling = np.empty((s, s, T, m, m))
    for k in range(s):
        for l in range(s):
            coupling[k, l] = a_inv[k, l] * op.mass.blocks if k != l else 0.0
    keep = partition_keep_mask(J0, partition_of)
    fstage, fcoupling, dinv, fail_stage, fail_elem = get_backend().coupled_factor(
        J0.indptr, J0.indices, J0.diag_pos, stage_data, coupling, keep,
        literal_update)
    if fail_stage >= 0:
        raise SingularPivotError(fail_elem, stage=fail_stage)
    fac = StageCoupledIlu0(op, fstage, fcoupling, dinv, keep)
    if counter is not None:
        counter.block_factorizations += s * T
        upper = sum(1 for k in range(J0.nnz_blocks)
                    if keep[k] and J0.indices[k] > _row_of(J0, k))
        # 2 products per kept upper edge per stage, 2 per cross-stage pair
        # per element: s * 2 * upper + (s^2 - s) * T in total
        counter.block_multiplies += 2 * s * upper + (s * s - s) * T
    return fac


class StageUncoupledIlu0:
    """s independent shifted ILU(0) factors, one per stage."""

    def __init__(self, factors: list[BlockIlu0], shifts: np.ndarray, workers: int = 1):
        self.factors = factors
        self.shifts = shifts
        self.workers = workers

    @property
    def s(self) -> int:
        return len(self.factors)

    @property
    def n(self) -> int:
        return self.factors[0].n

    def memory_blocks(self) -> int:
        return sum(len(f.indices) for f in self.factors)

    def apply(self, y: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
        s, n = self.s, self.n
        if y.shape != (s * n,):
            raise ValueError(f"expected vector of length {s * n}, got {y.shape}")
        yb = y.reshape(s, n)
        x = np.empty((s, n))
        if self.workers > 1:
            sub = [OpCounter() for _ in range(s)]
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                futures = [pool.submit(self.factors[k].apply, yb[k], sub[k])
                           for k in range(s)]
                for k, fut in enumerate(futures):
                    x[k] = fut.result()
            if counter is not None:
                for c in sub:
                    counter.merge(c)
        else:
            for k in range(s):
                x[k] = self.factors[k].apply(yb[k], counter)
        return x.ravel()


def stage_uncoupled_factorize(op: StageOperator, shifts: np.ndarray | None = None,
                              counter: OpCounter | None = None,
                              partition_of: np.ndarray | None = None,
                              workers: int = 1) -> StageUncoupledIlu0:
    """s independent ILU(0) factors of (A^-1_ii + alpha_i) M - dt J_i.

    ``shifts=None`` selects the unshifted variant (all alpha_i = 0);
    with ``workers > 1`` the per-stage factorizations run as parallel
    tasks (results are identical to serial execution).
    """
    s = op.s
    a_inv_diag = np.diag(op.derived.a_inv)
    if shifts is None:
        shifts = np.zeros(s)
    shifts = np.asarray(shifts, dtype=np.float64)
    if shifts.shape != (s,):
        raise ValueError(f"expected {s} shifts, got shape {shifts.shape}")

    def factor_one(k: int, sub_counter):
        mat = build_stage_matrix(a_inv_diag[k] + shifts[k], op.mass,
                                 op.jacobians[k], op.dt)
        try:
            return ilu0_factorize(mat, sub_counter, partition_of=partition_of)
        except SingularPivotError as exc:
            raise SingularPivotError(exc.element, stage=k) from exc

    if workers > 1:
        sub = [OpCounter() for _ in range(s)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(factor_one, k, sub[k]) for k in range(s)]
            factors = [fut.result() for fut in futures]
        if counter is not None:
            for c in sub:
                counter.merge(c)
    else:
        factors = [factor_one(k, counter) for k in range(s)]
    return StageUncoupledIlu0(factors, shifts, workers=workers)
