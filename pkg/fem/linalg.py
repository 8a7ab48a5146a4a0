"""
Linear Algebra
==============
Pivoted dense LU for element-local systems and SuperLU for the condensed
global trace system.

Local HDG blocks and the trace matrix are symmetric indefinite (σ changes
sign), so every factorization pivots.
"""

import logging
import warnings
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sps
from scipy.sparse.linalg import SuperLU, splu

from errors import SignHdgError

logger = logging.getLogger(__name__)

DENSE_PIVOT_TOL = 1e-14
SPARSE_PIVOT_TOL = 1e-14
PIVOT_THRESHOLD = 0.1


class LinalgError(SignHdgError):
    module = "linalg"


class SingularMatrixError(LinalgError):
    """Raised when a factorization meets a (numerically) zero pivot."""

    def __init__(self, message: str, pivot: Optional[int] = None, element: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot
        self.element = element


def _check_dense(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinalgError(f"Expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinalgError("Matrix has non-finite entries")
    return A


def dense_lu_solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """
    Solve A x = rhs by LU with partial pivoting.

    Args:
        A: (n, n) matrix
        rhs: (n,) or (n, r) right-hand side(s)

    Raises:
        SingularMatrixError: If a pivot falls below 1e-14·‖A‖∞ (index attached)
    """
    A = _check_dense(A)
    rhs = np.asarray(rhs, dtype=float)
    if A.shape[0] == 0:
        return np.zeros_like(rhs)
    scale = np.max(np.sum(np.abs(A), axis=1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    small = np.flatnonzero(pivots <= DENSE_PIVOT_TOL * scale)
    if scale == 0.0 or len(small):
        index = int(small[0]) if len(small) else 0
        raise SingularMatrixError(f"Matrix is numerically singular at pivot {index}", pivot=index)
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def batched_solve(A: np.ndarray, rhs: np.ndarray, first_element: int = 0) -> np.ndarray:
    """
    Solve a stack of small systems A[e] x[e] = rhs[e].

    Every block gets the pivot test of `dense_lu_solve`: an LU pivot below
    1e-14·‖A[e]‖∞ is reported together with the element index.

    Args:
        A: (ne, n, n)
        rhs: (ne, n, r)
        first_element: Global index of A[0], used in error messages

    Raises:
        SingularMatrixError: Naming the first element with a small pivot
    """
    A = np.asarray(A, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise LinalgError(f"Expected a stack of square matrices, got shape {A.shape}")
    if len(A) == 0 or A.shape[1] == 0:
        return np.zeros_like(rhs)
    if not np.all(np.isfinite(A)):
        raise LinalgError("Matrix has non-finite entries")

    scale = np.max(np.sum(np.abs(A), axis=2), axis=1)
    _, _, U = scipy.linalg.lu(A, p_indices=True, check_finite=False)
    pivots = np.abs(np.diagonal(U, axis1=1, axis2=2))
    small = pivots <= DENSE_PIVOT_TOL * scale[:, None]
    if np.any(small):
        e, index = (int(i) for i in np.argwhere(small)[0])
        raise SingularMatrixError(
            f"Local system of element {first_element + e} is singular at pivot {index}",
            pivot=index, element=first_element + e,
        )
    return np.linalg.solve(A, rhs)


def assemble_csr(rows: np.ndarray, cols: np.ndarray, values: np.ndarray, n: int) -> sps.csr_matrix:
    """Sum triplets into an n×n CSR matrix with sorted column indices."""
    A = sps.coo_matrix((np.asarray(values).reshape(-1),
                        (np.asarray(rows).reshape(-1), np.asarray(cols).reshape(-1))),
                       shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def matrix_asymmetry(A) -> float:
    """max |A - Aᵀ| / max |A| (0 for an empty or zero matrix)."""
    if sps.issparse(A):
        if A.nnz == 0:
            return 0.0
        diff = abs(A - A.T)
        top = diff.max() if diff.nnz else 0.0
        return float(top / abs(A).max())
    A = np.asarray(A)
    if A.size == 0 or not np.any(A):
        return 0.0
    return float(np.max(np.abs(A - A.T)) / np.max(np.abs(A)))


def inf_norm(A) -> float:
    if sps.issparse(A):
        return float(abs(A).sum(axis=1).max()) if A.shape[0] else 0.0
    A = np.asarray(A)
    return float(np.max(np.sum(np.abs(A), axis=1))) if A.size else 0.0


def sparse_lu_factor(A: sps.spmatrix) -> SuperLU:
    """
    Factorize a sparse square matrix with SuperLU.

    Threshold partial pivoting (0.1) with a minimum-degree ordering of
    Aᵀ + A, the symmetric-mode settings suited to symmetric indefinite
    matrices. The factorization can be reused for further right-hand sides.

    Raises:
        SingularMatrixError: If the factorization hits a pivot below
            1e-14·‖A‖∞; this signals loss of discrete well-posedness
    """
    if A.shape[0] != A.shape[1]:
        raise LinalgError(f"Expected a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        raise LinalgError("Cannot factorize an empty matrix")

    A = sps.csc_matrix(A)
    scale = inf_norm(A)
    try:
        lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=PIVOT_THRESHOLD,
                  options={"SymmetricMode": True})
    except RuntimeError as err:
        raise SingularMatrixError(f"Sparse factorization failed: {err}") from err

    pivots = np.abs(lu.U.diagonal())
    small = np.flatnonzero(pivots <= SPARSE_PIVOT_TOL * scale)
    if len(small):
        raise SingularMatrixError(
            f"Sparse matrix is numerically singular at pivot {int(small[0])}", pivot=int(small[0]))
    return lu


def sparse_lu_solve(A: sps.spmatrix, b: np.ndarray, factorization: Optional[SuperLU] = None) -> np.ndarray:
    """
    Solve a sparse square system with SuperLU.

    Args:
        A: System matrix, used for the residual check
        b: Right-hand side
        factorization: Result of `sparse_lu_factor(A)`; computed when omitted

    Raises:
        SingularMatrixError: If the factorization fails or the solve is not finite
    """
    if A.shape[0] != A.shape[1]:
        raise LinalgError(f"Expected a square matrix, got shape {A.shape}")
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0)

    lu = sparse_lu_factor(A) if factorization is None else factorization
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("Sparse solve produced non-finite values")

    residual = np.max(np.abs(A @ x - b))
    bound = 1e-9 * (inf_norm(A) * np.max(np.abs(x)) + np.max(np.abs(b)))
    if residual > bound:
        logger.warning(f"Sparse solve residual {residual:.3e} exceeds bound {bound:.3e}")
    return x
