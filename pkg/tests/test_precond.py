import numpy as np
import pytest

from irksolve import (BlockDiagonalMatrix, GmresConfig, OpCounter,
                      SingularPivotError, StageOperator, build_line_mesh,
                      build_stage_matrix, builtin_tableau, derive, gmres,
                      ilu0_factorize, partition, partition_keep_mask,
                      stage_coupled_factorize, stage_uncoupled_factorize)
from irksolve.kernels import get_backend
from irksolve.meshing import ElementGraph, single_element_graph
from irksolve.problems import make_prothero_robinson
from tests.test_meshing_blocks import random_matrix


def make_stage_op(name="RADAU35", T=8, m=3, dt=0.05, seed=0):
    tab = builtin_tableau(name)
    der = derive(tab)
    graph = build_line_mesh(T, periodic=True)
    rng = np.random.default_rng(seed)
    mass = BlockDiagonalMatrix(
        np.eye(m) + 0.05 * rng.standard_normal((T, m, m)))
    jacs = [random_matrix(graph, m, seed=seed + 1 + k) for k in range(tab.s)]
    return tab, der, StageOperator(der, dt, mass, jacs)


def test_ilu_exact_on_tree_graph():
    # non-periodic line has no cycles, so the zero-fill factorization is exact
    g = build_line_mesh(8)
    mat = random_matrix(g, 3, seed=1)
    fac = ilu0_factorize(mat.copy())
    rhs = np.random.default_rng(2).standard_normal(mat.n)
    x, stats = gmres(lambda v: mat.matvec(v), lambda v: fac.apply(v), rhs,
                     GmresConfig(rel_tol=1e-10))
    assert stats.iterations == 1
    np.testing.assert_allclose(mat.matvec(x), rhs, atol=1e-10)


def test_general_equals_simplified_when_condition_holds():
    g = build_line_mesh(9, periodic=True)
    mat = random_matrix(g, 3, seed=4)
    f_general = ilu0_factorize(mat.copy(), force_general=True)
    f_simple = ilu0_factorize(mat.copy())
    np.testing.assert_array_equal(f_general.fdata, f_simple.fdata)
    np.testing.assert_array_equal(f_general.dinv, f_simple.dinv)


def test_general_path_handles_fill_updates():
    # triangle violates the no-common-neighbor condition; the general
    # algorithm applies the inner update, the simplified sweep does not
    tri = ElementGraph(num_elements=3, adjacency=[[1, 2], [0, 2], [0, 1]])
    mat = random_matrix(tri, 2, seed=6, diag_boost=5.0)
    fac = ilu0_factorize(mat.copy())
    keep = np.ones(mat.nnz_blocks, dtype=bool)
    f_simple, _, fail = get_backend().ilu0_factor(
        mat.indptr, mat.indices, mat.diag_pos, mat.data, keep, True)
    assert fail == -1
    assert np.abs(fac.fdata - f_simple).max() > 1e-3
    rhs = np.random.default_rng(7).standard_normal(mat.n)
    _, stats = gmres(lambda v: mat.matvec(v), lambda v: fac.apply(v), rhs,
                     GmresConfig(rel_tol=1e-10))
    assert stats.converged
    assert stats.iterations <= 3


def test_singular_pivot_detected():
    g = build_line_mesh(4)
    mat = random_matrix(g, 2, seed=8)
    mat.set_block(0, 0, np.zeros((2, 2)))
    with pytest.raises(SingularPivotError) as exc:
        ilu0_factorize(mat)
    assert exc.value.element == 0


def test_partition_mask_drops_cross_blocks():
    g = partition(build_line_mesh(8, periodic=True), 4)
    mat = random_matrix(g, 2, seed=3)
    keep = partition_keep_mask(mat, g.partition_of)
    dropped = [(i, int(mat.indices[k]))
               for i in range(8)
               for k in range(mat.indptr[i], mat.indptr[i + 1])
               if not keep[k]]
    # each of the 4 cut interfaces drops both directed blocks
    assert len(dropped) == 8
    for i, j in dropped:
        assert g.partition_of[i] != g.partition_of[j]


def test_full_partitioning_equals_block_jacobi():
    tab, der, op = make_stage_op()
    T = 8
    fac = stage_uncoupled_factorize(op, der.shifts,
                                    partition_of=np.arange(T))
    y = np.random.default_rng(5).standard_normal(op.total_dim)
    x = fac.apply(y)
    # direct block-Jacobi oracle: invert each diagonal block separately
    ad = np.diag(der.a_inv)
    expected = np.empty_like(y)
    n = op.n
    for k in range(tab.s):
        smat = build_stage_matrix(ad[k] + der.shifts[k], op.mass,
                                  op.jacobians[k], op.dt)
        diag = np.stack([smat.get_block(i, i) for i in range(T)])
        yb = y[k * n:(k + 1) * n].reshape(T, -1, 1)
        expected[k * n:(k + 1) * n] = np.linalg.solve(diag, yb).ravel()
    np.testing.assert_allclose(x, expected, atol=1e-14)


def test_coupled_exact_on_single_element():
    pr = make_prothero_robinson(-50.0)
    der = derive(builtin_tableau("RADAU23"))
    jac = pr.jacobian(0.0, pr.initial_state())
    op = StageOperator(der, 0.1, pr.mass(), [jac.copy(), jac.copy()])
    fac = stage_coupled_factorize(op)
    rhs = np.array([0.7, -0.3])
    np.testing.assert_allclose(fac.apply(rhs),
                               np.linalg.solve(op.to_dense(), rhs), atol=1e-13)


def test_coupled_beats_uncoupled_on_model_operator():
    tab, der, op = make_stage_op(dt=0.2)
    rhs = np.random.default_rng(9).standard_normal(op.total_dim)
    iters = {}
    for label, fac in (("coupled", stage_coupled_factorize(op)),
                       ("uncoupled", stage_uncoupled_factorize(op, der.shifts))):
        _, stats = gmres(lambda v: op.matvec(v), lambda v: fac.apply(v), rhs,
                         GmresConfig(rel_tol=1e-8))
        assert stats.converged
        iters[label] = stats.iterations
    assert iters["coupled"] <= iters["uncoupled"]


def test_unshifted_is_zero_shift():
    tab, der, op = make_stage_op()
    fac0 = stage_uncoupled_factorize(op, None)
    np.testing.assert_array_equal(fac0.shifts, np.zeros(tab.s))
    fac_explicit = stage_uncoupled_factorize(op, np.zeros(tab.s))
    y = np.random.default_rng(11).standard_normal(op.total_dim)
    np.testing.assert_array_equal(fac0.apply(y), fac_explicit.apply(y))


def test_stage_parallel_apply_is_bitwise_identical():
    tab, der, op = make_stage_op()
    y = np.random.default_rng(13).standard_normal(op.total_dim)
    serial = stage_uncoupled_factorize(op, der.shifts, workers=1)
    parallel = stage_uncoupled_factorize(op, der.shifts, workers=tab.s)
    np.testing.assert_array_equal(serial.apply(y), parallel.apply(y))


def test_counters_factorize_and_apply():
    tab, der, op = make_stage_op(T=8, m=3)
    s, T, r = tab.s, 8, 2
    c = OpCounter()
    fac = stage_coupled_factorize(op, c)
    assert c.block_factorizations == s * T
    assert c.block_multiplies == s * r * T + (s * s - s) * T
    c = OpCounter()
    fac.apply(np.zeros(op.total_dim), c)
    assert c.block_multiplies == s * (r + s) * T

    c = OpCounter()
    unc = stage_uncoupled_factorize(op, der.shifts, c)
    assert c.block_factorizations == s * T
    assert c.block_multiplies == s * r * T
    c = OpCounter()
    unc.apply(np.zeros(op.total_dim), c)
    assert c.block_multiplies == s * (r + 1) * T


def test_coupled_memory_blocks():
    tab, der, op = make_stage_op()
    fac = stage_coupled_factorize(op)
    s, T, r = tab.s, 8, 2
    assert fac.memory_blocks() == s * (r + 1) * T + (s * s - s) * T
    unc = stage_uncoupled_factorize(op, der.shifts)
    assert unc.memory_blocks() == s * (r + 1) * T


def test_literal_update_variant_still_preconditions():
    tab, der, op = make_stage_op(dt=0.1)
    fac = stage_coupled_factorize(op, literal_update=True)
    rhs = np.random.default_rng(17).standard_normal(op.total_dim)
    _, stats = gmres(lambda v: op.matvec(v), lambda v: fac.apply(v), rhs,
                     GmresConfig(rel_tol=1e-8))
    assert stats.converged
