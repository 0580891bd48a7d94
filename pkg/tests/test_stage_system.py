import numpy as np
import pytest

from irksolve import (BlockDiagonalMatrix, OpCounter, StageOperator,
                      UntransformedOperator, build_line_mesh, builtin_tableau,
                      derive, k_to_w, w_to_k)
from tests.test_meshing_blocks import random_matrix


def make_setup(name="RADAU35", T=6, m=3, dt=0.07, seed=0):
    tab = builtin_tableau(name)
    der = derive(tab)
    graph = build_line_mesh(T, periodic=True)
    rng = np.random.default_rng(seed)
    mass = BlockDiagonalMatrix(
        np.eye(m) + 0.1 * rng.standard_normal((T, m, m)))
    jacs = [random_matrix(graph, m, seed=seed + 1 + k) for k in range(tab.s)]
    return tab, der, mass, jacs, dt


def test_transformed_matvec_matches_kron_oracle():
    tab, der, mass, jacs, dt = make_setup()
    op = StageOperator(der, dt, mass, jacs)
    x = np.random.default_rng(5).standard_normal(op.total_dim)
    np.testing.assert_allclose(op.matvec(x), op.to_dense() @ x, atol=1e-12)


def test_untransformed_matvec_matches_kron_oracle():
    tab, der, mass, jacs, dt = make_setup()
    op = UntransformedOperator(tab, dt, mass, jacs)
    x = np.random.default_rng(6).standard_normal(op.total_dim)
    np.testing.assert_allclose(op.matvec(x), op.to_dense() @ x, atol=1e-12)


def test_formulations_are_similar():
    # B_transformed (A (x) I) = B_untransformed as dense matrices
    tab, der, mass, jacs, dt = make_setup(T=4)
    trans = StageOperator(der, dt, mass, jacs).to_dense()
    untrans = UntransformedOperator(tab, dt, mass, jacs).to_dense()
    n = mass.n
    kron_a = np.kron(tab.A, np.eye(n))
    np.testing.assert_allclose(trans @ kron_a, untrans, atol=1e-11)


def test_stage_vector_roundtrip():
    tab = builtin_tableau("RADAU35")
    der = derive(tab)
    k = np.random.default_rng(1).standard_normal(3 * 10)
    np.testing.assert_allclose(w_to_k(der, k_to_w(tab, k)), k, atol=1e-12)


def test_matvec_counters():
    tab, der, mass, jacs, dt = make_setup(T=6, m=3)
    s, T = tab.s, 6
    nnzb = jacs[0].nnz_blocks
    op = StageOperator(der, dt, mass, jacs)
    c = OpCounter()
    op.matvec(np.zeros(op.total_dim), c)
    assert c.jacobian_multiplies == s * nnzb
    assert c.mass_multiplies == s * s * T

    un = UntransformedOperator(tab, dt, mass, jacs)
    c = OpCounter()
    un.matvec(np.zeros(un.total_dim), c)
    assert c.jacobian_multiplies == s * s * nnzb
    assert c.mass_multiplies == s * T


def test_dimension_checks():
    tab, der, mass, jacs, dt = make_setup()
    op = StageOperator(der, dt, mass, jacs)
    with pytest.raises(ValueError):
        op.matvec(np.zeros(op.total_dim + 1))
    with pytest.raises(ValueError):
        StageOperator(der, dt, mass, jacs[:-1])
