"""Element adjacency graphs and contiguous partitioning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ElementGraph:
    """Adjacency of mesh elements; the block pattern of every operator.

    ``partition_of`` assigns each element to a partition id in [0, P).
    """

    num_elements: int
    adjacency: list  # per-element sorted list of neighbor indices
    periodic: bool = False
    partition_of: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.partition_of is None:
            self.partition_of = np.zeros(self.num_elements, dtype=np.int64)
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if j == i:
                    raise ValueError(f"self-loop at element {i}")
                if i not in self.adjacency[j]:
                    raise ValueError(f"asymmetric adjacency: {i} -> {j}")

    @property
    def num_partitions(self) -> int:
        return int(self.partition_of.max()) + 1

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def num_blocks(self) -> int:
        """Stored blocks of a matrix on this pattern: diagonal + edges."""
        return self.num_elements + sum(len(a) for a in self.adjacency)

    def satisfies_simplified_ilu_condition(self) -> bool:
        """True iff no two neighbors of any element are themselves neighbors."""
        adj_sets = [set(a) for a in self.adjacency]
        for i in range(self.num_elements):
            nbrs = self.adjacency[i]
            for a in range(len(nbrs)):
                for b in range(a + 1, len(nbrs)):
                    if nbrs[b] in adj_sets[nbrs[a]]:
                        return False
        return True


def build_line_mesh(T: int, periodic: bool = False) -> ElementGraph:
    """1D line of T elements; element i neighbors i-1 and i+1 (wrapping if periodic)."""
    if T < 2:
        raise ValueError(f"need at least 2 elements, got {T}")
    if periodic and T < 4:
        raise ValueError(
            f"periodic line with T={T} violates the simplified-ILU neighbor condition")
    adjacency = []
    for i in range(T):
        nbrs = []
        if periodic:
            nbrs = sorted({(i - 1) % T, (i + 1) % T})
        else:
            if i > 0:
                nbrs.append(i - 1)
            if i < T - 1:
                nbrs.append(i + 1)
        adjacency.append(nbrs)
    return ElementGraph(num_elements=T, adjacency=adjacency, periodic=periodic)


def single_element_graph() -> ElementGraph:
    """Degenerate one-element graph for scalar test problems."""
    return ElementGraph(num_elements=1, adjacency=[[]])


def partition(graph: ElementGraph, P: int) -> ElementGraph:
    """Assign contiguous element ranges to P partitions, sizes differing by <= 1."""
    T = graph.num_elements
    if not 1 <= P <= T:
        raise ValueError(f"partition count {P} outside [1, {T}]")
    part = np.empty(T, dtype=np.int64)
    for p, chunk in enumerate(np.array_split(np.arange(T), P)):
        part[chunk] = p
    return ElementGraph(num_elements=T, adjacency=graph.adjacency,
                        periodic=graph.periodic, partition_of=part)
