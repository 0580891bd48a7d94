import numpy as np
import pytest

from irksolve import (BlockDiagonalMatrix, BlockSparseMatrix, ElementGraph,
                      OpCounter, build_line_mesh, dump_matrix, load_matrix,
                      partition, single_element_graph)


def random_matrix(graph, m, seed=0, diag_boost=3.0):
    rng = np.random.default_rng(seed)
    mat = BlockSparseMatrix(graph, m)
    for i in range(graph.num_elements):
        mat.set_block(i, i, diag_boost * np.eye(m) + rng.standard_normal((m, m)))
        for j in graph.adjacency[i]:
            mat.set_block(i, j, rng.standard_normal((m, m)))
    return mat


def test_line_mesh_shapes():
    g = build_line_mesh(5)
    assert g.adjacency[0] == [1]
    assert g.adjacency[2] == [1, 3]
    assert g.num_blocks() == 5 + 8


def test_periodic_line_mesh():
    g = build_line_mesh(6, periodic=True)
    assert g.adjacency[0] == [1, 5]
    assert all(g.degree(i) == 2 for i in range(6))
    assert g.num_blocks() == 18


def test_small_periodic_rejected():
    with pytest.raises(ValueError):
        build_line_mesh(3, periodic=True)


def test_asymmetric_adjacency_rejected():
    with pytest.raises(ValueError):
        ElementGraph(num_elements=2, adjacency=[[1], []])


def test_simplified_condition():
    assert build_line_mesh(8).satisfies_simplified_ilu_condition()
    assert build_line_mesh(8, periodic=True).satisfies_simplified_ilu_condition()
    # triangle: every pair of neighbors is itself adjacent
    tri = ElementGraph(num_elements=3, adjacency=[[1, 2], [0, 2], [0, 1]])
    assert not tri.satisfies_simplified_ilu_condition()


def test_partition_contiguous():
    g = partition(build_line_mesh(10), 3)
    assert g.num_partitions == 3
    sizes = np.bincount(g.partition_of)
    assert sizes.max() - sizes.min() <= 1
    assert np.all(np.diff(g.partition_of) >= 0)


def test_partition_bounds():
    g = build_line_mesh(4)
    with pytest.raises(ValueError):
        partition(g, 5)
    with pytest.raises(ValueError):
        partition(g, 0)


def test_single_element_graph():
    g = single_element_graph()
    assert g.num_elements == 1 and g.num_blocks() == 1


def test_matvec_matches_dense():
    g = build_line_mesh(7, periodic=True)
    mat = random_matrix(g, 3, seed=2)
    x = np.random.default_rng(3).standard_normal(mat.n)
    np.testing.assert_allclose(mat.matvec(x), mat.to_dense() @ x, atol=1e-13)


def test_matvec_counter():
    g = build_line_mesh(6, periodic=True)
    mat = random_matrix(g, 2)
    c = OpCounter()
    mat.matvec(np.ones(mat.n), c)
    assert c.block_multiplies == mat.nnz_blocks == 18


def test_block_get_set_roundtrip():
    g = build_line_mesh(4)
    mat = BlockSparseMatrix(g, 2)
    blk = np.arange(4.0).reshape(2, 2)
    mat.set_block(2, 1, blk)
    np.testing.assert_array_equal(mat.get_block(2, 1), blk)
    with pytest.raises(KeyError):
        mat.get_block(0, 3)


def test_block_diagonal_ops():
    rng = np.random.default_rng(0)
    blocks = rng.standard_normal((5, 3, 3)) + 4 * np.eye(3)
    d = BlockDiagonalMatrix(blocks)
    x = rng.standard_normal(15)
    np.testing.assert_allclose(d.matvec(x), d.to_dense() @ x, atol=1e-13)
    np.testing.assert_allclose(d.matvec(d.solve(x)), x, atol=1e-12)


def test_spd_check():
    good = BlockDiagonalMatrix(np.broadcast_to(np.eye(2), (3, 2, 2)).copy())
    good.assert_spd()
    bad = BlockDiagonalMatrix(-np.broadcast_to(np.eye(2), (3, 2, 2)).copy())
    with pytest.raises(ValueError):
        bad.assert_spd()


def test_dump_load_roundtrip(tmp_path):
    g = build_line_mesh(5, periodic=True)
    mat = random_matrix(g, 3, seed=9)
    path = str(tmp_path / "mat.txt")
    dump_matrix(mat, path)
    back = load_matrix(path, g)
    np.testing.assert_array_equal(back.data, mat.data)


def test_counter_merge_reset():
    a = OpCounter(block_multiplies=3, block_solves=1)
    b = OpCounter(block_multiplies=2, block_factorizations=4)
    a.merge(b)
    assert a.block_multiplies == 5 and a.block_factorizations == 4
    a.reset()
    assert a.snapshot() == OpCounter().snapshot()
