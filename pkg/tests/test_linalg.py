"""
Tests for the dense and sparse solvers.
"""

import numpy as np
import pytest
import scipy.sparse as sps

from fem import (
    LinalgError, SingularMatrixError, assemble_csr, batched_solve, dense_lu_solve,
    matrix_asymmetry, sparse_lu_factor, sparse_lu_solve,
)


def test_dense_solve_needs_pivoting():
    A = np.array([[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]])
    x = np.array([1.0, -2.0, 0.5])
    assert np.allclose(dense_lu_solve(A, A @ x), x)


def test_dense_singular_reports_pivot():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError) as info:
        dense_lu_solve(A, np.ones(2))
    assert info.value.pivot == 1


def test_dense_rejects_non_square():
    with pytest.raises(LinalgError):
        dense_lu_solve(np.ones((2, 3)), np.ones(2))


def test_batched_solve_names_singular_element():
    A = np.stack([np.eye(2), np.array([[1.0, 2.0], [2.0, 4.0]])])
    rhs = np.ones((2, 2, 1))
    with pytest.raises(SingularMatrixError) as info:
        batched_solve(A, rhs, first_element=10)
    assert info.value.element == 11
    assert "element 11" in str(info.value)


def test_batched_solve():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(5, 4, 4)) + 4.0 * np.eye(4)
    x = rng.normal(size=(5, 4, 2))
    assert np.allclose(batched_solve(A, A @ x), x)


def test_sparse_symmetric_indefinite():
    # zero diagonal: no pivot order on the diagonal alone works
    A = sps.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(sparse_lu_solve(A, np.array([2.0, 3.0])), [3.0, 2.0])


def test_sparse_solve_saddle_point():
    rng = np.random.default_rng(0)
    K = rng.normal(size=(6, 6))
    K = K @ K.T + 6.0 * np.eye(6)
    B = rng.normal(size=(2, 6))
    A = np.block([[K, B.T], [B, np.zeros((2, 2))]])
    x = rng.normal(size=8)
    assert np.allclose(sparse_lu_solve(sps.csr_matrix(A), A @ x), x)


def test_sparse_singular():
    A = sps.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularMatrixError):
        sparse_lu_solve(A, np.ones(2))


def test_sparse_empty_system():
    assert sparse_lu_solve(sps.csr_matrix((0, 0)), np.zeros(0)).shape == (0,)


def test_assemble_csr_sums_duplicates():
    A = assemble_csr(np.array([0, 0, 1, 1]), np.array([1, 1, 0, 1]), np.array([1.0, 2.0, 3.0, 4.0]), 2)
    assert np.array_equal(A.toarray(), [[0.0, 3.0], [3.0, 4.0]])
    assert A.has_sorted_indices


def test_matrix_asymmetry():
    A = np.array([[1.0, 2.0], [2.5, 4.0]])
    assert matrix_asymmetry(A) == pytest.approx(0.125)
    assert matrix_asymmetry(sps.csr_matrix(A)) == pytest.approx(0.125)
    assert matrix_asymmetry(np.zeros((2, 2))) == 0.0


def test_batched_solve_rejects_nearly_singular_block():
    nearly = np.array([[1.0, 1.0], [1.0, 1.0 + 4e-16]])
    A = np.stack([np.eye(2), 2.0 * np.eye(2), nearly])
    with pytest.raises(SingularMatrixError) as info:
        batched_solve(A, np.ones((3, 2, 1)), first_element=5)
    assert info.value.element == 7
    assert info.value.pivot == 1


def test_batched_solve_empty_stack():
    assert batched_solve(np.zeros((0, 3, 3)), np.zeros((0, 3, 1))).shape == (0, 3, 1)


def test_dense_and_sparse_agree_on_spd_matrix():
    rng = np.random.default_rng(7)
    K = rng.normal(size=(40, 40))
    A = K @ K.T + 40.0 * np.eye(40)
    b = rng.normal(size=40)
    dense = dense_lu_solve(A, b)
    sparse = sparse_lu_solve(sps.csr_matrix(A), b)
    assert np.max(np.abs(dense - sparse)) < 1e-10


def test_sparse_factorization_is_reusable():
    rng = np.random.default_rng(2)
    K = rng.normal(size=(6, 6))
    A = sps.csr_matrix(K + K.T + 12.0 * np.eye(6))
    lu = sparse_lu_factor(A)
    for _ in range(2):
        x = rng.normal(size=6)
        assert np.allclose(sparse_lu_solve(A, A @ x, factorization=lu), x)


def test_sparse_factor_rejects_empty_matrix():
    with pytest.raises(LinalgError):
        sparse_lu_factor(sps.csr_matrix((0, 0)))
