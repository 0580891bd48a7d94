import numpy as np
import pytest

from irksolve import (BlockDiagonalMatrix, StageOperator, build_line_mesh,
                      builtin_tableau, derive, ilu0_factorize,
                      stage_coupled_factorize, stage_uncoupled_factorize)
from irksolve.kernels import get_backend, set_backend
from tests.test_meshing_blocks import random_matrix

pytest.importorskip("numba")


@pytest.fixture
def both_backends():
    original = get_backend().NAME
    yield
    set_backend(original)


def make_op(dt=0.08, T=8, m=3, seed=0):
    tab = builtin_tableau("RADAU35")
    der = derive(tab)
    rng = np.random.default_rng(seed)
    mass = BlockDiagonalMatrix(np.eye(m) + 0.05 * rng.standard_normal((T, m, m)))
    graph = build_line_mesh(T, periodic=True)
    jacs = [random_matrix(graph, m, seed=seed + 1 + k) for k in range(tab.s)]
    return der, StageOperator(der, dt, mass, jacs)


def per_backend(fn):
    out = {}
    for name in ("numpy", "numba"):
        set_backend(name)
        out[name] = fn()
    return out["numpy"], out["numba"]


def test_matvec_parity(both_backends):
    g = build_line_mesh(10, periodic=True)
    mat = random_matrix(g, 3, seed=1)
    x = np.random.default_rng(2).standard_normal(mat.n)
    a, b = per_backend(lambda: mat.matvec(x))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_ilu_factor_and_apply_parity(both_backends):
    g = build_line_mesh(10, periodic=True)
    mat = random_matrix(g, 3, seed=3)
    y = np.random.default_rng(4).standard_normal(mat.n)

    def run():
        fac = ilu0_factorize(mat.copy())
        return fac.fdata.copy(), fac.dinv.copy(), fac.apply(y)

    (fa, da, xa), (fb, db, xb) = per_backend(run)
    np.testing.assert_allclose(fa, fb, atol=1e-12)
    np.testing.assert_allclose(da, db, atol=1e-12)
    np.testing.assert_allclose(xa, xb, atol=1e-12)


def test_coupled_parity(both_backends):
    der, op = make_op()
    y = np.random.default_rng(5).standard_normal(op.total_dim)
    a, b = per_backend(lambda: stage_coupled_factorize(op).apply(y))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_uncoupled_parity(both_backends):
    der, op = make_op(seed=6)
    y = np.random.default_rng(7).standard_normal(op.total_dim)
    a, b = per_backend(
        lambda: stage_uncoupled_factorize(op, der.shifts).apply(y))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_singular_pivot_detected_on_both(both_backends):
    from irksolve import SingularPivotError
    g = build_line_mesh(4)
    for name in ("numpy", "numba"):
        set_backend(name)
        mat = random_matrix(g, 2, seed=8)
        mat.set_block(0, 0, np.zeros((2, 2)))
        with pytest.raises(SingularPivotError):
            ilu0_factorize(mat)


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        set_backend("fortran")
