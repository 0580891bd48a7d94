"""Butcher tableaux for the L-stable implicit Runge-Kutta schemes.

Provides closed-form tableaux (RADAU23, RADAU35, DIRK33, ESDIRK65), a
general s-stage Radau IIA generator, derived quantities (inverse Butcher
matrix, preconditioner shifts) and order-condition checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial import legendre as npleg


class SchemeKind(Enum):
    FULLY_IMPLICIT = "fully_implicit"
    DIRK = "dirk"
    ESDIRK = "esdirk"


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta coefficients (A, b, c) plus scheme metadata.

    Immutable; arrays are not copied on access, callers must not mutate.
    """

    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    stage_order: int
    kind: SchemeKind

    @property
    def s(self) -> int:
        return len(self.b)

    @property
    def num_implicit_stages(self) -> int:
        if self.kind is SchemeKind.ESDIRK:
            return self.s - 1
        return self.s

    def validate(self, tol: float = 1e-12) -> None:
        """Check row sums, consistency and triangularity constraints."""
        row_err = np.max(np.abs(self.A.sum(axis=1) - self.c))
        if row_err > tol:
            raise ValueError(f"{self.name}: row-sum defect {row_err:.2e} exceeds {tol:.1e}")
        cons = abs(self.b.sum() - 1.0)
        if cons > tol:
            raise ValueError(f"{self.name}: sum(b) - 1 = {cons:.2e} exceeds {tol:.1e}")
        if self.kind in (SchemeKind.DIRK, SchemeKind.ESDIRK):
            upper = np.max(np.abs(np.triu(self.A, k=1)))
            if upper > 0.0:
                raise ValueError(f"{self.name}: nonzero entry above the diagonal")


@dataclass(frozen=True)
class TableauDerived:
    """Quantities derived from an invertible Butcher matrix.

    ``shifts[i]`` is the column-i sum of off-diagonal absolute values of
    ``a_inv``, used by the shifted stage-uncoupled preconditioner.
    """

    a_inv: np.ndarray
    bT_a_inv: np.ndarray
    shifts: np.ndarray


BUILTIN_NAMES = ("RADAU23", "RADAU35", "RADAU47", "RADAU59", "DIRK33", "ESDIRK65")


def _radau23() -> ButcherTableau:
    A = np.array([[5.0 / 12.0, -1.0 / 12.0], [3.0 / 4.0, 1.0 / 4.0]])
    b = np.array([3.0 / 4.0, 1.0 / 4.0])
    c = np.array([1.0 / 3.0, 1.0])
    return ButcherTableau("RADAU23", A, b, c, order=3, stage_order=2,
                          kind=SchemeKind.FULLY_IMPLICIT)


def _radau35() -> ButcherTableau:
    r6 = math.sqrt(6.0)
    A = np.array([
        [11.0 / 45.0 - 7.0 * r6 / 360.0,
         37.0 / 225.0 - 169.0 * r6 / 1800.0,
         -2.0 / 225.0 + r6 / 75.0],
        [37.0 / 225.0 + 169.0 * r6 / 1800.0,
         11.0 / 45.0 + 7.0 * r6 / 360.0,
         -2.0 / 225.0 - r6 / 75.0],
        [4.0 / 9.0 - r6 / 36.0, 4.0 / 9.0 + r6 / 36.0, 1.0 / 9.0],
    ])
    b = A[2].copy()
    c = np.array([0.4 - r6 / 10.0, 0.4 + r6 / 10.0, 1.0])
    return ButcherTableau("RADAU35", A, b, c, order=5, stage_order=3,
                          kind=SchemeKind.FULLY_IMPLICIT)


def _dirk33() -> ButcherTableau:
    phi = math.atan(math.sqrt(2.0) / 4.0) / 3.0
    alpha = (1.0 + math.sqrt(6.0) / 2.0 * math.sin(phi)
             - math.sqrt(2.0) / 2.0 * math.cos(phi))
    tau2 = (1.0 + alpha) / 2.0
    b1 = -(6.0 * alpha ** 2 - 16.0 * alpha + 1.0) / 4.0
    b2 = (6.0 * alpha ** 2 - 20.0 * alpha + 5.0) / 4.0
    A = np.array([
        [alpha, 0.0, 0.0],
        [tau2 - alpha, alpha, 0.0],
        [b1, b2, alpha],
    ])
    b = np.array([b1, b2, alpha])
    c = np.array([alpha, tau2, 1.0])
    return ButcherTableau("DIRK33", A, b, c, order=3, stage_order=1, kind=SchemeKind.DIRK)


def _esdirk65() -> ButcherTableau:
    g = 0.2780538411364465
    A = np.array([
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [g, g, 0.0, 0.0, 0.0, 0.0],
        [0.3137405401502951, 0.4363327154020044, g, 0.0, 0.0, 0.0],
        [0.2741986534107860, -0.0164268277321164, 0.0048197082596452, g, 0.0, 0.0],
        [-0.2441776975175844, -3.3203529439447852, 0.0477747285706825,
         3.2974431145814931, g, 0.0],
        [-0.2786732780227907, 1.8929947094010862, -0.1280948204262490,
         -1.3574693381380240, 0.5931888860495311, g],
    ])
    b = A[5].copy()
    c = np.array([0.0, 0.556107682272893, 1.028127096688746,
                  0.540645375074761, 0.058741042826253, 1.0])
    return ButcherTableau("ESDIRK65", A, b, c, order=5, stage_order=2,
                          kind=SchemeKind.ESDIRK)


def builtin_tableau(name: str) -> ButcherTableau:
    """Return a named scheme; RADAU47/RADAU59 come from the generator."""
    key = name.upper()
    if key == "RADAU23":
        return _radau23()
    if key == "RADAU35":
        return _radau35()
    if key == "RADAU47":
        return generate_radau_iia(4)
    if key == "RADAU59":
        return generate_radau_iia(5)
    if key == "DIRK33":
        return _dirk33()
    if key == "ESDIRK65":
        return _esdirk65()
    raise ValueError(f"unknown scheme {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")


def _radau_poly_coeffs(s: int) -> np.ndarray:
    """Legendre-basis coefficients of Q_s(y) = P_s(y) - P_{s-1}(y), y = 2x - 1."""
    coeffs = np.zeros(s + 1)
    coeffs[s] = 1.0
    coeffs[s - 1] = -1.0
    return coeffs


def _radau_abscissae(s: int) -> np.ndarray:
    """Roots of Q_s(x) = P_s(2x-1) - P_{s-1}(2x-1) on (0, 1].

    Safeguarded Newton from Chebyshev-point initial guesses; x = 1 is
    always a root and is set exactly.
    """
    if s == 1:
        return np.array([1.0])
    coeffs = _radau_poly_coeffs(s)
    dcoeffs = npleg.legder(coeffs)

    def q(x):
        return npleg.legval(2.0 * x - 1.0, coeffs)

    def dq(x):
        return 2.0 * npleg.legval(2.0 * x - 1.0, dcoeffs)

    # Bracket the s-1 interior roots by sign scanning, excluding x = 1.
    grid = np.linspace(0.0, 1.0 - 1e-9, 64 * s)
    vals = q(grid)
    brackets = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            brackets.append((grid[i], grid[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            brackets.append((grid[i], grid[i + 1]))
    if len(brackets) != s - 1:
        raise RuntimeError(
            f"Radau abscissa bracketing found {len(brackets)} interior roots "
            f"for s={s}, expected {s - 1}")

    cheb = 0.5 * (1.0 - np.cos(np.pi * (2 * np.arange(1, s) - 1) / (2 * (s - 1) + 1)))
    roots = []
    for (lo, hi), x0 in zip(brackets, cheb):
        x = x0 if lo < x0 < hi else 0.5 * (lo + hi)
        flo = q(lo)
        for _ in range(100):
            fx = q(x)
            if abs(fx) <= 1e-14:
                break
            # Maintain the bracket, bisect if Newton leaves it.
            if flo * fx < 0.0:
                hi = x
            else:
                lo, flo = x, fx
            step = fx / dq(x)
            x_new = x - step
            if not (lo < x_new < hi):
                x_new = 0.5 * (lo + hi)
            x = x_new
        else:
            raise RuntimeError(
                f"Radau root Newton iteration failed for s={s}: |Q|={abs(q(x)):.2e}")
        roots.append(x)
    roots.append(1.0)
    return np.array(sorted(roots))


def _lagrange_integrals(c: np.ndarray) -> np.ndarray:
    """a[i, k] = integral over [0, c_i] of the k-th Lagrange basis on nodes c.

    Gauss-Legendre quadrature with s + 2 points; the integrand has degree
    s - 1, so this is exact up to roundoff.
    """
    s = len(c)
    xg, wg = np.polynomial.legendre.leggauss(s + 2)
    A = np.empty((s, s))
    for i in range(s):
        # map [-1, 1] -> [0, c_i]
        x = 0.5 * c[i] * (xg + 1.0)
        w = 0.5 * c[i] * wg
        for k in range(s):
            ell = np.ones_like(x)
            for j in range(s):
                if j != k:
                    ell *= (x - c[j]) / (c[k] - c[j])
            A[i, k] = np.dot(w, ell)
    return A


def generate_radau_iia(s: int) -> ButcherTableau:
    """Construct the s-stage Radau IIA tableau (order 2s - 1, stage order s)."""
    if not 1 <= s <= 9:
        raise ValueError(f"stage count {s} outside supported range [1, 9]")
    c = _radau_abscissae(s)
    A = _lagrange_integrals(c)
    b = A[s - 1].copy()  # stiff accuracy: b_j = a_{sj}
    return ButcherTableau(f"RADAU{s}{2 * s - 1}", A, b, c, order=2 * s - 1,
                          stage_order=s, kind=SchemeKind.FULLY_IMPLICIT)


def derive(tab: ButcherTableau) -> TableauDerived:
    """Inverse Butcher matrix, b^T A^{-1}, and preconditioner shifts.

    For ESDIRK tableaux only the implicit trailing substage block is
    invertible, so the derivation is applied to ``A[1:, 1:]``.
    """
    if tab.kind is SchemeKind.ESDIRK:
        A = tab.A[1:, 1:]
        b = tab.b[1:]
    else:
        A = tab.A
        b = tab.b
    s = A.shape[0]
    if abs(np.linalg.det(A)) < 1e-14:
        raise ValueError(f"{tab.name}: Butcher matrix is singular, cannot derive A^-1")
    a_inv = np.linalg.solve(A, np.eye(s))
    bT_a_inv = b @ a_inv
    shifts = np.abs(a_inv).sum(axis=0) - np.abs(np.diag(a_inv))
    return TableauDerived(a_inv=a_inv, bT_a_inv=bT_a_inv, shifts=shifts)


def stability_function(tab: ButcherTableau, z: complex) -> complex:
    """R(z) = 1 + z b^T (I - z A)^{-1} 1."""
    s = tab.s
    mat = np.eye(s, dtype=complex) - z * tab.A
    try:
        y = np.linalg.solve(mat, np.ones(s, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"I - zA singular at z = {z}") from exc
    return 1.0 + z * np.dot(tab.b, y)


# (label, weight function, right-hand side) for the rooted-tree conditions
# through order 5.  Phi is evaluated with A, b, c from the tableau.
_ORDER_CONDITIONS = {
    1: [("b.1", lambda A, b, c: b.sum(), 1.0)],
    2: [("b.c", lambda A, b, c: b @ c, 1.0 / 2.0)],
    3: [
        ("b.c^2", lambda A, b, c: b @ c ** 2, 1.0 / 3.0),
        ("b.Ac", lambda A, b, c: b @ (A @ c), 1.0 / 6.0),
    ],
    4: [
        ("b.c^3", lambda A, b, c: b @ c ** 3, 1.0 / 4.0),
        ("b.(c*Ac)", lambda A, b, c: b @ (c * (A @ c)), 1.0 / 8.0),
        ("b.Ac^2", lambda A, b, c: b @ (A @ c ** 2), 1.0 / 12.0),
        ("b.AAc", lambda A, b, c: b @ (A @ (A @ c)), 1.0 / 24.0),
    ],
    5: [
        ("b.c^4", lambda A, b, c: b @ c ** 4, 1.0 / 5.0),
        ("b.(c^2*Ac)", lambda A, b, c: b @ (c ** 2 * (A @ c)), 1.0 / 10.0),
        ("b.(Ac)^2", lambda A, b, c: b @ (A @ c) ** 2, 1.0 / 20.0),
        ("b.(c*Ac^2)", lambda A, b, c: b @ (c * (A @ c ** 2)), 1.0 / 15.0),
        ("b.(c*AAc)", lambda A, b, c: b @ (c * (A @ (A @ c))), 1.0 / 30.0),
        ("b.Ac^3", lambda A, b, c: b @ (A @ c ** 3), 1.0 / 20.0),
        ("b.A(c*Ac)", lambda A, b, c: b @ (A @ (c * (A @ c))), 1.0 / 40.0),
        ("b.AAc^2", lambda A, b, c: b @ (A @ (A @ c ** 2)), 1.0 / 60.0),
        ("b.AAAc", lambda A, b, c: b @ (A @ (A @ (A @ c))), 1.0 / 120.0),
    ],
}


@dataclass
class OrderConditionReport:
    """Residuals of the classical and stage-order conditions."""

    conditions: list  # (order, label, residual)
    stage_residuals: np.ndarray  # shape (q, s): k-th row is stage condition k+1
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return all(abs(r) <= self.tol for _, _, r in self.conditions)

    @property
    def max_residual(self) -> float:
        return max(abs(r) for _, _, r in self.conditions)


def check_order_conditions(tab: ButcherTableau, up_to: int) -> OrderConditionReport:
    """Residuals of rooted-tree conditions up to order ``up_to`` (max 5).

    Stage-order residuals sum_j a_ij c_j^{k-1} - c_i^k / k are reported
    for k up to the tableau's declared stage order.
    """
    if up_to > 5:
        raise ValueError("order conditions hard-coded only through order 5")
    A, b, c = tab.A, tab.b, tab.c
    conditions = []
    for p in range(1, up_to + 1):
        for label, phi, rhs in _ORDER_CONDITIONS[p]:
            conditions.append((p, label, float(phi(A, b, c) - rhs)))
    q = max(tab.stage_order, 1)
    stage_res = np.empty((q, tab.s))
    for k in range(1, q + 1):
        stage_res[k - 1] = A @ c ** (k - 1) - c ** k / k
    return OrderConditionReport(conditions=conditions, stage_residuals=stage_res)


def stage_order_residual(tab: ButcherTableau, k: int) -> np.ndarray:
    """Residual of the k-th stage-order condition, one entry per stage."""
    return tab.A @ tab.c ** (k - 1) - tab.c ** k / k
