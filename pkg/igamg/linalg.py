import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from igamg.errors import ArgumentError, NotSPDError, SingularError

logger = logging.getLogger(__name__)

SparseMatrix = scipy.sparse.csr_matrix
MatrixLike = Union[np.ndarray, scipy.sparse.spmatrix]

RANK_TOL = 1e-12
SYMMETRY_TOL = 1e-12


def as_csr(mat: MatrixLike) -> SparseMatrix:
    csr = scipy.sparse.csr_matrix(mat, dtype=float)
    csr.sum_duplicates()
    csr.sort_indices()
    return csr


def as_dense(mat: MatrixLike) -> np.ndarray:
    if scipy.sparse.issparse(mat):
        return mat.toarray()  # type: ignore
    return np.asarray(mat, dtype=float)


def max_abs(mat: MatrixLike) -> float:
    if scipy.sparse.issparse(mat):
        data = scipy.sparse.csr_matrix(mat).data
        return float(np.max(np.abs(data))) if data.size > 0 else 0.0
    arr = np.asarray(mat)
    return float(np.max(np.abs(arr))) if arr.size > 0 else 0.0


def is_symmetric(mat: MatrixLike, rtol: float = SYMMETRY_TOL) -> bool:
    if mat.shape[0] != mat.shape[1]:
        return False
    scale = max_abs(mat)
    if scale == 0.0:
        return True
    return max_abs(mat - mat.T) <= rtol * scale


def spmv(mat: SparseMatrix, vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or mat.shape[1] != vec.shape[0]:
        raise ArgumentError(
            "cannot multiply a {} matrix with a vector of shape {}".format(mat.shape, vec.shape)
        )
    return np.asarray(mat @ vec, dtype=float)


def triple_product(
    restriction: MatrixLike, mat: MatrixLike, prolongation: MatrixLike
) -> SparseMatrix:
    """Galerkin product R A P with deduplicated, sorted columns."""
    if restriction.shape[1] != mat.shape[0] or mat.shape[1] != prolongation.shape[0]:
        raise ArgumentError(
            "non conformal shapes {} x {} x {}".format(
                restriction.shape, mat.shape, prolongation.shape
            )
        )
    product = as_csr(restriction) @ as_csr(mat) @ as_csr(prolongation)
    return as_csr(product)


@dataclass(frozen=True)
class ThinQR:
    q: np.ndarray
    r: np.ndarray
    rank: int  # number of leading columns judged independent


def thin_qr(mat: np.ndarray, rank_tol: float = RANK_TOL) -> ThinQR:
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Column j counts as dependent when |R_jj| <= rank_tol * |R_00|; its Q column
    is set to zero. Wide matrices are accepted, their surplus columns end up
    dependent.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2:
        raise ArgumentError("thin_qr expects a matrix, got shape {}".format(mat.shape))
    n_rows, n_cols = mat.shape
    q = np.zeros((n_rows, n_cols))
    r = np.zeros((n_cols, n_cols))
    rank = n_cols
    ref = 0.0
    for j in range(n_cols):
        v = mat[:, j].copy()
        for _ in range(2):
            for i in range(j):
                coef = float(q[:, i] @ v)
                r[i, j] += coef
                v -= coef * q[:, i]
        norm = float(np.linalg.norm(v))
        r[j, j] = norm
        if j == 0:
            ref = norm
        if norm == 0.0 or norm <= rank_tol * ref:
            rank = min(rank, j)
            continue
        q[:, j] = v / norm
    return ThinQR(q, r, rank)


def solve_upper_triangular(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    b = np.asarray(b, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1] or r.shape[0] != b.shape[0]:
        raise ArgumentError("shape mismatch {} vs {}".format(r.shape, b.shape))
    if np.any(np.diag(r) == 0.0):
        raise SingularError("zero on the diagonal of the triangular factor")
    return scipy.linalg.solve_triangular(r, b, lower=False)


class DenseFactor:
    """Direct solver of a small matrix, factorized once.

    Cholesky for symmetric matrices, LU otherwise.
    """

    symmetric: bool
    dim: int

    def __init__(self, mat: MatrixLike, assume_symmetric: bool = False):
        dense = as_dense(mat)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ArgumentError("direct solve needs a square matrix, got {}".format(dense.shape))
        self.dim = dense.shape[0]
        self.symmetric = assume_symmetric or is_symmetric(dense)
        if self.symmetric:
            try:
                self._factor = scipy.linalg.cho_factor(dense, lower=True)
            except np.linalg.LinAlgError as e:
                raise NotSPDError("nonpositive pivot in cholesky: {}".format(e))
        else:
            lu, piv = scipy.linalg.lu_factor(dense)
            if np.any(np.diag(lu) == 0.0):
                raise SingularError("matrix is singular")
            self._factor = (lu, piv)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dim:
            raise ArgumentError("rhs of length {} for dimension {}".format(b.shape[0], self.dim))
        if self.symmetric:
            return scipy.linalg.cho_solve(self._factor, b)
        return scipy.linalg.lu_solve(self._factor, b)


def dense_factor(mat: MatrixLike) -> DenseFactor:
    return DenseFactor(mat)


def solve_spd(mat: MatrixLike, b: np.ndarray) -> np.ndarray:
    dense = as_dense(mat)
    if dense.shape[0] != np.asarray(b).shape[0]:
        raise ArgumentError("shape mismatch {} vs {}".format(dense.shape, np.shape(b)))
    if not is_symmetric(dense):
        raise NotSPDError("matrix is not symmetric")
    return DenseFactor(dense, assume_symmetric=True).solve(b)


def solve_direct(mat: MatrixLike, b: np.ndarray) -> np.ndarray:
    """Sparse LU solve, used for reference solutions on fine grids."""
    csc = scipy.sparse.csc_matrix(mat, dtype=float)
    if csc.shape[0] != np.asarray(b).shape[0]:
        raise ArgumentError("shape mismatch {} vs {}".format(csc.shape, np.shape(b)))
    return np.asarray(scipy.sparse.linalg.spsolve(csc, b), dtype=float)


def spectral_radius(mat: np.ndarray, n_iter: int = 400, seed: int = 0) -> float:
    """Power-iteration estimate of the spectral radius from the growth rate of |B^k x|."""
    mat = as_dense(mat)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(mat.shape[0])
    x /= np.linalg.norm(x)
    log_growth = []
    for _ in range(n_iter):
        x = mat @ x
        norm = float(np.linalg.norm(x))
        if norm == 0.0:
            return 0.0
        log_growth.append(np.log(norm))
        x /= norm
    tail = log_growth[len(log_growth) // 2 :]
    return float(np.exp(np.mean(tail)))
