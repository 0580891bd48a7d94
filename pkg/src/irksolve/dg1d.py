"""Nodal DG machinery on 1D periodic meshes.

Gauss-Lobatto nodal basis per element, upwind advective fluxes,
interior-penalty diffusion.  Produces operators with the diagonal-plus-
neighbor block sparsity that the solver stack is built around (r = 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg


def gauss_lobatto_nodes(p: int) -> np.ndarray:
    """p + 1 Gauss-Lobatto-Legendre nodes on [-1, 1]."""
    if p < 1:
        raise ValueError("polynomial degree must be at least 1")
    if p == 1:
        return np.array([-1.0, 1.0])
    coeffs = np.zeros(p + 1)
    coeffs[p] = 1.0
    interior = npleg.legroots(npleg.legder(coeffs))
    return np.concatenate(([-1.0], np.sort(interior), [1.0]))


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    w = np.ones_like(nodes)
    for i in range(len(nodes)):
        for j in range(len(nodes)):
            if j != i:
                w[i] /= nodes[i] - nodes[j]
    return w


def lagrange_eval(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis at points x; shape (len(x), len(nodes))."""
    w = barycentric_weights(nodes)
    out = np.zeros((len(x), len(nodes)))
    for q, xq in enumerate(x):
        diff = xq - nodes
        onnode = np.isclose(diff, 0.0, atol=1e-14)
        if onnode.any():
            out[q, np.argmax(onnode)] = 1.0
        else:
            terms = w / diff
            out[q] = terms / terms.sum()
    return out


def differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    """D[i, j] = derivative of basis j at node i (barycentric form)."""
    w = barycentric_weights(nodes)
    n = len(nodes)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (w[j] / w[i]) / (nodes[i] - nodes[j])
        D[i, i] = -D[i].sum()
    return D


@dataclass
class ReferenceElement:
    """Operators on [-1, 1] for a degree-p Gauss-Lobatto nodal basis."""

    p: int
    nodes: np.ndarray
    mass: np.ndarray        # M[i,j]  = int l_i l_j
    stiff: np.ndarray       # S[i,j]  = int l_i' l_j
    laplace: np.ndarray     # K[i,j]  = int l_i' l_j'
    diff: np.ndarray        # D[i,j]  = l_j'(x_i)

    @classmethod
    def build(cls, p: int) -> "ReferenceElement":
        nodes = gauss_lobatto_nodes(p)
        # Gauss-Legendre with p+1 points is exact for the degree-2p products
        xg, wg = np.polynomial.legendre.leggauss(p + 1)
        L = lagrange_eval(nodes, xg)
        D = differentiation_matrix(nodes)
        # Ld[q, j] = l_j'(x_q): l_j' has degree p - 1, so interpolating its
        # nodal values D[:, j] is exact.
        Ld = L @ D
        mass = L.T @ (wg[:, None] * L)
        stiff = Ld.T @ (wg[:, None] * L)
        laplace = Ld.T @ (wg[:, None] * Ld)
        return cls(p=p, nodes=nodes, mass=mass, stiff=stiff, laplace=laplace, diff=D)

    @property
    def m(self) -> int:
        return self.p + 1


@dataclass
class Dg1dConfig:
    """Periodic 1D DG discretization parameters."""

    poly_degree: int
    elements: int
    length: float = 1.0
    advection: float = 1.0
    diffusion: float = 0.0
    penalty: float | None = None  # default 2 (p+1)^2 / h

    def __post_init__(self):
        if self.poly_degree < 1:
            raise ValueError("poly_degree must be >= 1")
        if self.elements < 4:
            raise ValueError("need at least 4 elements for a periodic mesh")
        if self.diffusion < 0:
            raise ValueError("diffusion must be nonnegative")
        h = self.length / self.elements
        min_sigma = (self.poly_degree + 1) ** 2 / h
        if self.penalty is None:
            self.penalty = 2.0 * min_sigma
        elif self.diffusion > 0 and self.penalty < min_sigma:
            raise ValueError(
                f"penalty {self.penalty} below coercivity bound {min_sigma}")

    @property
    def h(self) -> float:
        return self.length / self.elements

    @property
    def m(self) -> int:
        return self.poly_degree + 1


class Dg1dGrid:
    """Node coordinates and assembled linear operators on a periodic line."""

    def __init__(self, cfg: Dg1dConfig):
        self.cfg = cfg
        self.ref = ReferenceElement.build(cfg.poly_degree)
        T, m, h = cfg.elements, self.ref.m, cfg.h
        self.T, self.m, self.h = T, m, h
        # physical node coordinates, element-major
        xs = np.empty((T, m))
        for e in range(T):
            xs[e] = e * h + 0.5 * h * (self.ref.nodes + 1.0)
        self.x = xs.ravel()
        self.element_mass = (h / 2.0) * self.ref.mass

    @property
    def n(self) -> int:
        return self.T * self.m

    def mass_blocks(self) -> np.ndarray:
        return np.broadcast_to(self.element_mass, (self.T, self.m, self.m)).copy()

    def advection_blocks(self, a: float):
        """Upwind DG advection operator; returns (diag, left, right) m x m blocks
        shared by every element of the periodic mesh."""
        m = self.m
        last, first = m - 1, 0
        diag = a * self.ref.stiff.copy()
        left = np.zeros((m, m))
        right = np.zeros((m, m))
        if a >= 0:
            # interface value taken from the left element
            diag[last, last] -= a
            left[first, last] += a
        else:
            diag[first, first] += a
            right[last, first] -= a
        return diag, left, right

    def diffusion_blocks(self, nu: float, sigma: float):
        """Interior-penalty (SIPG) diffusion operator blocks (diag, left, right)."""
        m, h = self.m, self.h
        last, first = m - 1, 0
        scale = 2.0 / h
        D = self.ref.diff
        dlast = scale * D[last]   # d/dx of basis at right endpoint
        dfirst = scale * D[first]
        e_last = np.zeros(m)
        e_last[last] = 1.0
        e_first = np.zeros(m)
        e_first[first] = 1.0

        diag = -nu * scale * self.ref.laplace.copy()
        left = np.zeros((m, m))
        right = np.zeros((m, m))

        # Right interface of each element (shared with right neighbor).
        # jump [u] = u_self(xf) - u_right(xf);  average {u'} = (u'_self + u'_right)/2
        # residual += {nu u'} [phi] + {nu phi'} [u] - sigma nu [u][phi]
        # test functions of self: [phi] = e_last, {phi'} = dlast / 2
        diag += nu * 0.5 * np.outer(e_last, dlast)
        right += nu * 0.5 * np.outer(e_last, dfirst)
        diag += nu * 0.5 * np.outer(dlast, e_last)
        right -= nu * 0.5 * np.outer(dlast, e_first)
        diag -= sigma * nu * np.outer(e_last, e_last)
        right += sigma * nu * np.outer(e_last, e_first)

        # Left interface (shared with left neighbor); [phi] = -e_first there.
        diag -= nu * 0.5 * np.outer(e_first, dfirst)
        left -= nu * 0.5 * np.outer(e_first, dlast)
        diag += nu * 0.5 * np.outer(dfirst, e_first)
        left -= nu * 0.5 * np.outer(dfirst, e_last)
        diag -= sigma * nu * np.outer(e_first, e_first)
        left += sigma * nu * np.outer(e_first, e_last)
        return diag, left, right
