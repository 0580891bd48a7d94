"""Block-sparse and block-diagonal matrices with instrumented kernels.

Storage is CSR-of-blocks: per block row, sorted column indices (the
diagonal entry always present) and a dense (nnzb, m, m) data array.
Vector layout is element-major: all m unknowns of element 0 first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import get_backend
from .meshing import ElementGraph


@dataclass
class OpCounter:
    """Counts of dense m x m block operations, for cost-model reconciliation.

    ``mass_multiplies`` / ``jacobian_multiplies`` are sub-categories of
    ``block_multiplies`` maintained by the stage-operator products.
    """

    block_multiplies: int = 0
    block_solves: int = 0
    block_factorizations: int = 0
    mass_multiplies: int = 0
    jacobian_multiplies: int = 0

    def reset(self) -> None:
        self.block_multiplies = 0
        self.block_solves = 0
        self.block_factorizations = 0
        self.mass_multiplies = 0
        self.jacobian_multiplies = 0

    def merge(self, other: "OpCounter") -> None:
        self.block_multiplies += other.block_multiplies
        self.block_solves += other.block_solves
        self.block_factorizations += other.block_factorizations
        self.mass_multiplies += other.mass_multiplies
        self.jacobian_multiplies += other.jacobian_multiplies

    def snapshot(self) -> dict:
        return {
            "block_multiplies": self.block_multiplies,
            "block_solves": self.block_solves,
            "block_factorizations": self.block_factorizations,
            "mass_multiplies": self.mass_multiplies,
            "jacobian_multiplies": self.jacobian_multiplies,
        }


class BlockSparseMatrix:
    """T x T matrix of dense m x m blocks on an element-graph pattern."""

    def __init__(self, graph: ElementGraph, block_size: int):
        self.graph = graph
        self.m = block_size
        T = graph.num_elements
        indptr = np.zeros(T + 1, dtype=np.int64)
        cols = []
        diag_pos = np.zeros(T, dtype=np.int64)
        for i in range(T):
            row = sorted(graph.adjacency[i] + [i])
            diag_pos[i] = len(cols) + row.index(i)
            cols.extend(row)
            indptr[i + 1] = len(cols)
        self.indptr = indptr
        self.indices = np.array(cols, dtype=np.int64)
        self.diag_pos = diag_pos
        self.data = np.zeros((len(cols), block_size, block_size))

    @property
    def T_elems(self) -> int:
        return self.graph.num_elements

    @property
    def n(self) -> int:
        return self.T_elems * self.m

    @property
    def nnz_blocks(self) -> int:
        return len(self.indices)

    def _pos(self, i: int, j: int) -> int:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = np.searchsorted(self.indices[lo:hi], j) + lo
        if k >= hi or self.indices[k] != j:
            raise KeyError(f"block ({i}, {j}) not in pattern")
        return int(k)

    def set_block(self, i: int, j: int, block: np.ndarray) -> None:
        self.data[self._pos(i, j)] = block

    def get_block(self, i: int, j: int) -> np.ndarray:
        return self.data[self._pos(i, j)]

    def copy(self) -> "BlockSparseMatrix":
        out = BlockSparseMatrix.__new__(BlockSparseMatrix)
        out.graph = self.graph
        out.m = self.m
        out.indptr = self.indptr
        out.indices = self.indices
        out.diag_pos = self.diag_pos
        out.data = self.data.copy()
        return out

    def scaled(self, factor: float) -> "BlockSparseMatrix":
        out = self.copy()
        out.data *= factor
        return out

    def to_dense(self) -> np.ndarray:
        """Assemble the full n x n matrix (test oracle use only)."""
        m, T = self.m, self.T_elems
        dense = np.zeros((T * m, T * m))
        for i in range(T):
            for k in range(self.indptr[i], self.indptr[i + 1]):
                j = self.indices[k]
                dense[i * m:(i + 1) * m, j * m:(j + 1) * m] = self.data[k]
        return dense

    def matvec(self, x: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {x.shape}")
        y = get_backend().bsr_matvec(self.indptr, self.indices, self.data, x)
        if counter is not None:
            counter.block_multiplies += self.nnz_blocks
        return y


class BlockDiagonalMatrix:
    """T dense m x m blocks on the diagonal (mass matrices)."""

    def __init__(self, blocks: np.ndarray):
        blocks = np.asarray(blocks, dtype=np.float64)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError("expected (T, m, m) block array")
        self.blocks = blocks

    @classmethod
    def identity(cls, T: int, m: int) -> "BlockDiagonalMatrix":
        return cls(np.broadcast_to(np.eye(m), (T, m, m)).copy())

    @classmethod
    def repeated(cls, block: np.ndarray, T: int) -> "BlockDiagonalMatrix":
        return cls(np.broadcast_to(block, (T,) + block.shape).copy())

    @property
    def T_elems(self) -> int:
        return self.blocks.shape[0]

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def n(self) -> int:
        return self.T_elems * self.m

    def matvec(self, x: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {x.shape}")
        y = np.einsum("tij,tj->ti", self.blocks, x.reshape(self.T_elems, self.m))
        if counter is not None:
            counter.block_multiplies += self.T_elems
        return y.ravel()

    def solve(self, x: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
        y = np.linalg.solve(self.blocks, x.reshape(self.T_elems, self.m, 1))
        if counter is not None:
            counter.block_solves += self.T_elems
        return y.ravel()

    def assert_spd(self) -> None:
        """Mass matrices must be SPD; Cholesky per block is the check."""
        try:
            np.linalg.cholesky(0.5 * (self.blocks + self.blocks.transpose(0, 2, 1)))
        except np.linalg.LinAlgError as exc:
            raise ValueError("block-diagonal matrix is not SPD") from exc

    def to_dense(self) -> np.ndarray:
        m, T = self.m, self.T_elems
        dense = np.zeros((T * m, T * m))
        for i in range(T):
            dense[i * m:(i + 1) * m, i * m:(i + 1) * m] = self.blocks[i]
        return dense


def dump_matrix(mat: BlockSparseMatrix, path: str) -> None:
    """Line-oriented text dump: header ``T m nnz_blocks``, then per block
    a line ``i j`` followed by m*m row-major values."""
    with open(path, "w") as fh:
        fh.write(f"{mat.T_elems} {mat.m} {mat.nnz_blocks}\n")
        for i in range(mat.T_elems):
            for k in range(mat.indptr[i], mat.indptr[i + 1]):
                fh.write(f"{i} {mat.indices[k]}\n")
                fh.write(" ".join(repr(float(v)) for v in mat.data[k].ravel()) + "\n")


def load_matrix(path: str, graph: ElementGraph) -> BlockSparseMatrix:
    with open(path) as fh:
        T, m, nnz = (int(tok) for tok in fh.readline().split())
        if T != graph.num_elements:
            raise ValueError(f"file has T={T}, graph has {graph.num_elements}")
        mat = BlockSparseMatrix(graph, m)
        if nnz != mat.nnz_blocks:
            raise ValueError(f"file has {nnz} blocks, pattern expects {mat.nnz_blocks}")
        for _ in range(nnz):
            i, j = (int(tok) for tok in fh.readline().split())
            vals = np.array([float(tok) for tok in fh.readline().split()])
            mat.set_block(i, j, vals.reshape(m, m))
    return mat
