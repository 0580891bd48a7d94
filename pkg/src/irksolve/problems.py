"""Semidiscrete test problems M du/dt = f(t, u).

Four problem families: linear block ODEs with a dense-eigensolve oracle,
linear DG advection-diffusion with a Fourier-mode exact solution, viscous
Burgers with a manufactured solution and analytic Jacobian, and the
scalar Prothero-Robinson problem for order-reduction studies.
"""

from __future__ import annotations

import numpy as np

from .blocks import BlockDiagonalMatrix, BlockSparseMatrix
from .dg1d import Dg1dConfig, Dg1dGrid
from .meshing import ElementGraph, build_line_mesh, single_element_graph


class SemidiscreteProblem:
    """Interface shared by all test problems.

    ``rhs`` is the right side of M du/dt = f(t, u); ``jacobian`` is
    df/du on the graph's block pattern.  ``exact`` returns None when no
    closed-form trajectory is available.
    """

    name: str = "problem"
    graph: ElementGraph
    m: int

    @property
    def n(self) -> int:
        return self.graph.num_elements * self.m

    def mass(self) -> BlockDiagonalMatrix:
        raise NotImplementedError

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, t: float, u: np.ndarray) -> BlockSparseMatrix:
        raise NotImplementedError

    def initial_state(self) -> np.ndarray:
        raise NotImplementedError

    def exact(self, t: float):
        return None


def fd_jacobian(problem: SemidiscreteProblem, t: float, u: np.ndarray) -> np.ndarray:
    """Dense central-difference Jacobian of rhs; test oracle use only."""
    n = len(u)
    h = 1e-7 * (1.0 + np.linalg.norm(u, np.inf))
    out = np.empty((n, n))
    for j in range(n):
        up = u.copy()
        um = u.copy()
        up[j] += h
        um[j] -= h
        out[:, j] = (problem.rhs(t, up) - problem.rhs(t, um)) / (2.0 * h)
    return out


class LinearBlockOde(SemidiscreteProblem):
    """u' = L u with L symmetric block tridiagonal; identity mass."""

    def __init__(self, graph: ElementGraph, lam: BlockSparseMatrix, seed: int):
        self.name = "linear-block-ode"
        self.graph = graph
        self.m = lam.m
        self.lam = lam
        dense = lam.to_dense()
        if not np.allclose(dense, dense.T, atol=1e-12):
            raise ValueError("operator must be symmetric for the eigensolve oracle")
        self.evals, self.evecs = np.linalg.eigh(dense)
        rng = np.random.default_rng(seed + 1)
        u0 = rng.standard_normal(self.n)
        self._u0 = u0 / np.linalg.norm(u0, np.inf)

    def mass(self) -> BlockDiagonalMatrix:
        return BlockDiagonalMatrix.identity(self.graph.num_elements, self.m)

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        return self.lam.matvec(u)

    def jacobian(self, t: float, u: np.ndarray) -> BlockSparseMatrix:
        return self.lam.copy()

    def initial_state(self) -> np.ndarray:
        return self._u0.copy()

    def exact(self, t: float) -> np.ndarray:
        V = self.evecs
        return V @ (np.exp(t * self.evals) * (V.T @ self._u0))


def make_linear_block_ode(T: int, m: int, spectrum: tuple,
                          seed: int = 0, periodic: bool = False) -> LinearBlockOde:
    """Random symmetric block-tridiagonal operator with eigenvalues
    affinely mapped into [spectrum[0], spectrum[1]] (both <= 0)."""
    lo, hi = float(spectrum[0]), float(spectrum[1])
    if hi > 0 or lo > hi:
        raise ValueError("spectrum must satisfy lo <= hi <= 0")
    graph = single_element_graph() if T == 1 else build_line_mesh(T, periodic=periodic)
    rng = np.random.default_rng(seed)
    raw = BlockSparseMatrix(graph, m)
    diag_blocks = []
    for i in range(T):
        B = rng.standard_normal((m, m))
        diag_blocks.append(0.5 * (B + B.T))
    edge = {}
    for i in range(T):
        for j in graph.adjacency[i]:
            if (j, i) in edge:
                edge[(i, j)] = edge[(j, i)].T
            else:
                edge[(i, j)] = rng.standard_normal((m, m))
    for i in range(T):
        raw.set_block(i, i, diag_blocks[i])
        for j in graph.adjacency[i]:
            raw.set_block(i, j, edge[(i, j)])
    evals = np.linalg.eigvalsh(raw.to_dense())
    emin, emax = evals[0], evals[-1]
    if emax - emin < 1e-12:
        c1, c0 = 0.0, lo
    else:
        c1 = (hi - lo) / (emax - emin)
        c0 = lo - c1 * emin
    lam = raw.scaled(c1)
    for i in range(T):
        lam.data[lam.diag_pos[i]] += c0 * np.eye(m)
    return LinearBlockOde(graph, lam, seed)


def _assemble_periodic(grid: Dg1dGrid, diag: np.ndarray, left: np.ndarray,
                       right: np.ndarray) -> BlockSparseMatrix:
    graph = build_line_mesh(grid.T, periodic=True)
    mat = BlockSparseMatrix(graph, grid.m)
    T = grid.T
    for e in range(T):
        mat.set_block(e, e, diag)
        mat.set_block(e, (e - 1) % T, left)
        mat.set_block(e, (e + 1) % T, right)
    return mat


class AdvectionDiffusionDg(SemidiscreteProblem):
    """Linear periodic advection-diffusion, nodal DG in space.

    Exact trajectory: the advected, diffusion-damped Fourier mode
    sin(2 pi (x - a t) / L) evaluated at the nodes.
    """

    def __init__(self, cfg: Dg1dConfig):
        self.name = "advection-diffusion-dg"
        self.cfg = cfg
        self.grid = Dg1dGrid(cfg)
        self.m = self.grid.m
        d, l, r = self.grid.advection_blocks(cfg.advection)
        if cfg.diffusion > 0:
            dd, dl, dr = self.grid.diffusion_blocks(cfg.diffusion, cfg.penalty)
            d, l, r = d + dd, l + dl, r + dr
        self.op = _assemble_periodic(self.grid, d, l, r)
        self.graph = self.op.graph

    def mass(self) -> BlockDiagonalMatrix:
        return BlockDiagonalMatrix(self.grid.mass_blocks())

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        return self.op.matvec(u)

    def jacobian(self, t: float, u: np.ndarray) -> BlockSparseMatrix:
        return self.op.copy()

    def initial_state(self) -> np.ndarray:
        return self.exact(0.0)

    def exact(self, t: float) -> np.ndarray:
        cfg = self.cfg
        k = 2.0 * np.pi / cfg.length
        damp = np.exp(-cfg.diffusion * k * k * t)
        return damp * np.sin(k * (self.grid.x - cfg.advection * t))


def make_advection_diffusion_dg(cfg: Dg1dConfig) -> AdvectionDiffusionDg:
    return AdvectionDiffusionDg(cfg)


class ViscousBurgersMms(SemidiscreteProblem):
    """Viscous Burgers u_t + (u^2/2)_x = nu u_xx + source, nodal DG.

    Convective flux: local Lax-Friedrichs with a fixed dissipation
    parameter so the Jacobian stays exactly block tridiagonal.  The
    source forces the manufactured profile 0.5 + 0.3 sin(2 pi x / L - t)
    to satisfy the PDE; the discrete solution tracks its nodal values up
    to spatial discretization error.
    """

    def __init__(self, cfg: Dg1dConfig, llf_dissipation: float = 1.0):
        self.name = "viscous-burgers-mms"
        self.cfg = cfg
        self.grid = Dg1dGrid(cfg)
        self.graph = build_line_mesh(cfg.elements, periodic=True)
        self.m = self.grid.m
        self.llf = llf_dissipation
        if cfg.diffusion > 0:
            self._diff = self.grid.diffusion_blocks(cfg.diffusion, cfg.penalty)
        else:
            z = np.zeros((self.m, self.m))
            self._diff = (z, z, z)

    def mass(self) -> BlockDiagonalMatrix:
        return BlockDiagonalMatrix(self.grid.mass_blocks())

    def manufactured(self, t: float) -> np.ndarray:
        theta = 2.0 * np.pi * self.grid.x / self.cfg.length - t
        return 0.5 + 0.3 * np.sin(theta)

    def _source(self, t: float) -> np.ndarray:
        """Pointwise u*_t + u* u*_x - nu u*_xx at the nodes."""
        cfg = self.cfg
        k = 2.0 * np.pi / cfg.length
        theta = k * self.grid.x - t
        ustar = 0.5 + 0.3 * np.sin(theta)
        ut = -0.3 * np.cos(theta)
        ux = 0.3 * k * np.cos(theta)
        uxx = -0.3 * k * k * np.sin(theta)
        return ut + ustar * ux - cfg.diffusion * uxx

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        T, m, lam = self.grid.T, self.m, self.llf
        last, first = m - 1, 0
        S = self.grid.ref.stiff
        Ld, Ll, Lr = self._diff
        ub = u.reshape(T, m)
        g = 0.5 * ub * ub
        out = np.empty((T, m))
        for e in range(T):
            em, ep = (e - 1) % T, (e + 1) % T
            acc = S @ g[e] + Ld @ ub[e] + Ll @ ub[em] + Lr @ ub[ep]
            # local Lax-Friedrichs flux at both faces of the element
            uLr, uRr = ub[e][last], ub[ep][first]
            fr = 0.5 * (g[e][last] + 0.5 * uRr * uRr) - 0.5 * lam * (uRr - uLr)
            uLl, uRl = ub[em][last], ub[e][first]
            fl = 0.5 * (0.5 * uLl * uLl + g[e][first]) - 0.5 * lam * (uRl - uLl)
            acc[last] -= fr
            acc[first] += fl
            out[e] = acc
        src = self._source(t).reshape(T, m)
        out += np.einsum("ij,tj->ti", self.grid.element_mass, src)
        return out.ravel()

    def jacobian(self, t: float, u: np.ndarray) -> BlockSparseMatrix:
        T, m, lam = self.grid.T, self.m, self.llf
        last, first = m - 1, 0
        S = self.grid.ref.stiff
        Ld, Ll, Lr = self._diff
        ub = u.reshape(T, m)
        mat = BlockSparseMatrix(self.graph, m)
        for e in range(T):
            em, ep = (e - 1) % T, (e + 1) % T
            diag = S * ub[e][None, :] + Ld
            diag[last, last] -= 0.5 * ub[e][last] + 0.5 * lam
            diag[first, first] += 0.5 * ub[e][first] - 0.5 * lam
            left = Ll.copy()
            left[first, last] += 0.5 * ub[em][last] + 0.5 * lam
            right = Lr.copy()
            right[last, first] -= 0.5 * ub[ep][first] - 0.5 * lam
            mat.set_block(e, e, diag)
            mat.set_block(e, em, left)
            mat.set_block(e, ep, right)
        return mat

    def initial_state(self) -> np.ndarray:
        return self.manufactured(0.0)

    def exact(self, t: float) -> np.ndarray:
        # exact for the PDE, approximate for the semidiscrete system
        return self.manufactured(t)


def make_viscous_burgers_mms(cfg: Dg1dConfig,
                             llf_dissipation: float = 1.0) -> ViscousBurgersMms:
    return ViscousBurgersMms(cfg, llf_dissipation)


class ProtheroRobinson(SemidiscreteProblem):
    """u' = lam (u - phi(t)) + phi'(t); exact solution phi when u0 = phi(0)."""

    def __init__(self, lam: float, phi=None, dphi=None):
        if lam >= 0:
            raise ValueError("stiffness must be negative")
        self.name = "prothero-robinson"
        self.lam = lam
        self.phi = phi if phi is not None else np.cos
        self.dphi = dphi if dphi is not None else (lambda t: -np.sin(t))
        self.graph = single_element_graph()
        self.m = 1

    def mass(self) -> BlockDiagonalMatrix:
        return BlockDiagonalMatrix.identity(1, 1)

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        return self.lam * (u - self.phi(t)) + self.dphi(t)

    def jacobian(self, t: float, u: np.ndarray) -> BlockSparseMatrix:
        mat = BlockSparseMatrix(self.graph, 1)
        mat.set_block(0, 0, np.array([[self.lam]]))
        return mat

    def initial_state(self) -> np.ndarray:
        return np.array([float(self.phi(0.0))])

    def exact(self, t: float) -> np.ndarray:
        return np.array([float(self.phi(t))])


def make_prothero_robinson(lam: float = -1e6, phi=None, dphi=None) -> ProtheroRobinson:
    return ProtheroRobinson(lam, phi, dphi)
