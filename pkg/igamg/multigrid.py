"""Geometric multigrid over nested uniform spline spaces.

Levels are numbered from 0 (coarsest) upwards. The prolongation of level l maps
level l coefficients to level l+1 and the restriction is its transpose, so the
coarse matrices satisfy the Galerkin condition A_l = R_l A_{l+1} P_l by
construction.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from igamg.assembly import DiscreteSystem
from igamg.config import SmootherConfig, SmootherKind
from igamg.errors import ArgumentError, OracleSizeError, SmootherError
from igamg.linalg import DenseFactor, SparseMatrix, as_csr, as_dense, spmv, triple_product
from igamg.spline import SplineSpace, dyadic_refine

logger = logging.getLogger(__name__)

COARSE_DIM_CAP = 1024
ORACLE_DIM_CAP = 512


class Smoother:
    """Relaxation x <- x + M^{-1}(b - A x) for a fixed matrix.

    M is D / omega for (weighted) Jacobi and the lower triangle D + L for
    Gauss-Seidel, whose rows are updated in ascending order.
    """

    matrix: SparseMatrix
    config: SmootherConfig

    def __init__(self, matrix: SparseMatrix, config: SmootherConfig):
        self.matrix = as_csr(matrix)
        self.config = config
        diag = self.matrix.diagonal()
        if np.any(diag == 0.0):
            raise SmootherError(
                "zero diagonal entry at rows {}".format(np.flatnonzero(diag == 0.0)[:10])
            )
        self._inv_diag = 1.0 / diag
        if config.kind == SmootherKind.gauss_seidel:
            self._lower = scipy.sparse.tril(self.matrix, k=0, format="csr")
            self._upper = scipy.sparse.triu(self.matrix, k=1, format="csr")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def sweep(self, b: np.ndarray, x: np.ndarray) -> np.ndarray:
        if self.config.kind == SmootherKind.gauss_seidel:
            rhs = b - self._upper @ x
            return scipy.sparse.linalg.spsolve_triangular(self._lower, rhs, lower=True)
        return x + self.config.weight * self._inv_diag * (b - self.matrix @ x)

    def __call__(self, b: np.ndarray, x0: np.ndarray, sweeps: int) -> np.ndarray:
        if b.shape != (self.dim,) or x0.shape != (self.dim,):
            raise ArgumentError(
                "smoother of dimension {} got b {} and x0 {}".format(self.dim, b.shape, x0.shape)
            )
        x = np.array(x0, dtype=float)
        for _ in range(sweeps):
            x = self.sweep(b, x)
        return x

    def iteration_matrix(self) -> np.ndarray:
        """dense S with x_new = S x + M^{-1} b"""
        dense = as_dense(self.matrix)
        if self.config.kind == SmootherKind.gauss_seidel:
            lower = np.tril(dense)
            return np.eye(self.dim) - scipy.linalg.solve_triangular(lower, dense, lower=True)
        return np.eye(self.dim) - self.config.weight * self._inv_diag[:, None] * dense


def smooth(
    matrix: SparseMatrix,
    b: np.ndarray,
    x0: np.ndarray,
    config: SmootherConfig,
    sweeps: int,
) -> np.ndarray:
    if sweeps < 0:
        raise ArgumentError("negative sweep count {}".format(sweeps))
    return Smoother(matrix, config)(np.asarray(b, dtype=float), np.asarray(x0, dtype=float), sweeps)


@dataclass(frozen=True, eq=False)
class Level:
    matrix: SparseMatrix
    prolongation: Optional[SparseMatrix]  # to the next finer level
    restriction: Optional[SparseMatrix]  # from the next finer level
    smoother: Smoother
    n_elements: Tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Hierarchy:
    levels: Tuple[Level, ...]
    smoother: SmootherConfig
    mu: int
    coarse_solver: DenseFactor
    rhs: np.ndarray  # right hand side of the finest level

    def __post_init__(self):
        assert len(self.levels) >= 2
        assert self.coarse_solver.dim == self.levels[0].dim
        assert self.rhs.shape == (self.levels[-1].dim,)

    @property
    def nlevels(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> int:
        return len(self.levels) - 1

    def __repr__(self):
        return "Hierarchy(dims={}, mu={})".format([lvl.dim for lvl in self.levels], self.mu)


def interior_two_scale(space: SplineSpace) -> Tuple[SplineSpace, SparseMatrix]:
    """Two-scale matrix of one bisection with the boundary functions removed."""
    fine, two_scale = dyadic_refine(space)
    return fine, as_csr(two_scale[1:-1, 1:-1])


def _coarse_spaces(
    fine_spaces: Tuple[SplineSpace, ...], nlevels: int
) -> List[Tuple[SplineSpace, ...]]:
    factor = 2 ** (nlevels - 1)
    coarsest = []
    for space in fine_spaces:
        if space.n_elements % factor != 0:
            raise ArgumentError(
                "{} elements cannot be halved {} times".format(space.n_elements, nlevels - 1)
            )
        coarse = SplineSpace.uniform(space.degree, space.n_elements // factor)
        if coarse.n_basis < 3:
            raise ArgumentError("coarsest level of {} has no interior unknowns".format(coarse))
        coarsest.append(coarse)
    return [tuple(coarsest)]


def build_hierarchy(
    fine_system: DiscreteSystem,
    nlevels: int,
    smoother: SmootherConfig,
    mu: int = 1,
    coarse_dim_cap: int = COARSE_DIM_CAP,
) -> Hierarchy:
    if nlevels < 2:
        raise ArgumentError("a hierarchy needs at least 2 levels, got {}".format(nlevels))
    if mu < 1:
        raise ArgumentError("cycle index mu must be >= 1, got {}".format(mu))

    spaces_per_level = _coarse_spaces(fine_system.spaces, nlevels)
    prolongations: List[SparseMatrix] = []
    for _ in range(nlevels - 1):
        refined = [interior_two_scale(space) for space in spaces_per_level[-1]]
        spaces_per_level.append(tuple(fine for fine, _ in refined))
        mats = [mat for _, mat in refined]
        prolongation = mats[0]
        for mat in mats[1:]:
            prolongation = scipy.sparse.kron(prolongation, mat, format="csr")
        prolongations.append(as_csr(prolongation))

    for space, expected in zip(spaces_per_level[-1], fine_system.spaces):
        assert np.allclose(space.knots, expected.knots, rtol=0.0, atol=1e-12)

    # Galerkin products from the finest level down
    matrices: List[SparseMatrix] = [fine_system.matrix]
    for prolongation in reversed(prolongations):
        matrices.insert(0, triple_product(prolongation.T, matrices[0], prolongation))

    if matrices[0].shape[0] > coarse_dim_cap:
        raise ArgumentError(
            "coarsest dimension {} exceeds the direct solve cap {}".format(
                matrices[0].shape[0], coarse_dim_cap
            )
        )

    levels = []
    for index, (matrix, spaces) in enumerate(zip(matrices, spaces_per_level)):
        prolongation = prolongations[index] if index < nlevels - 1 else None
        restriction = None if prolongation is None else as_csr(prolongation.T)
        levels.append(
            Level(
                matrix=matrix,
                prolongation=prolongation,
                restriction=restriction,
                smoother=Smoother(matrix, smoother),
                n_elements=tuple(s.n_elements for s in spaces),
            )
        )

    coarse_solver = DenseFactor(matrices[0])
    hierarchy = Hierarchy(tuple(levels), smoother, mu, coarse_solver, fine_system.rhs.copy())
    logger.info(
        "built {} with elements {}".format(hierarchy, [lvl.n_elements for lvl in levels])
    )
    return hierarchy


def mu_cycle(hierarchy: Hierarchy, level: int, b: np.ndarray, x0: np.ndarray) -> np.ndarray:
    if not 0 <= level < hierarchy.nlevels:
        raise ArgumentError("level {} outside 0..{}".format(level, hierarchy.finest))
    if level == 0:
        return hierarchy.coarse_solver.solve(b)

    current = hierarchy.levels[level]
    coarse = hierarchy.levels[level - 1]
    assert coarse.prolongation is not None and coarse.restriction is not None
    config = hierarchy.smoother

    x = current.smoother(b, x0, config.nu1)
    residual = b - spmv(current.matrix, x)
    coarse_residual = coarse.restriction @ residual
    coarse_error = np.zeros(coarse.dim)
    # the direct solve ignores its initial guess, so one pass is enough
    n_visits = 1 if level == 1 else hierarchy.mu
    for _ in range(n_visits):
        coarse_error = mu_cycle(hierarchy, level - 1, coarse_residual, coarse_error)
    x = x + coarse.prolongation @ coarse_error
    return current.smoother(b, x, config.nu2)


def two_grid_cycle(hierarchy: Hierarchy, b: np.ndarray, x0: np.ndarray) -> np.ndarray:
    if hierarchy.nlevels != 2:
        raise ArgumentError("two-grid cycle needs 2 levels, got {}".format(hierarchy.nlevels))
    return mu_cycle(hierarchy, 1, b, x0)


def _check_oracle_size(hierarchy: Hierarchy, level: int) -> None:
    if not 1 <= level < hierarchy.nlevels:
        raise ArgumentError("level {} has no coarse grid correction".format(level))
    dim = hierarchy.levels[level].dim
    if dim > ORACLE_DIM_CAP:
        raise OracleSizeError(
            "dense oracle limited to dimension {}, got {}".format(ORACLE_DIM_CAP, dim)
        )


def coarse_correction_matrix(hierarchy: Hierarchy, level: int) -> np.ndarray:
    """I - P A_c^{-1} R A with an exact coarse solve"""
    _check_oracle_size(hierarchy, level)
    current = hierarchy.levels[level]
    coarse = hierarchy.levels[level - 1]
    assert coarse.prolongation is not None and coarse.restriction is not None
    fine_dense = as_dense(current.matrix)
    restricted = as_dense(coarse.restriction) @ fine_dense
    solved = DenseFactor(coarse.matrix).solve(restricted)
    return np.eye(current.dim) - as_dense(coarse.prolongation) @ solved


def _homogeneous_part(hierarchy: Hierarchy, level: int) -> np.ndarray:
    if level == 0:
        return np.zeros((hierarchy.levels[0].dim, hierarchy.levels[0].dim))
    current = hierarchy.levels[level]
    coarse = hierarchy.levels[level - 1]
    assert coarse.prolongation is not None and coarse.restriction is not None
    config = hierarchy.smoother

    inner = _homogeneous_part(hierarchy, level - 1)
    n_visits = 1 if level == 1 else hierarchy.mu
    inexact = np.eye(coarse.dim) - np.linalg.matrix_power(inner, n_visits)
    solved = DenseFactor(coarse.matrix).solve(
        as_dense(coarse.restriction) @ as_dense(current.matrix)
    )
    correction = np.eye(current.dim) - as_dense(coarse.prolongation) @ inexact @ solved

    smoothing = current.smoother.iteration_matrix()
    post = np.linalg.matrix_power(smoothing, config.nu2)
    pre = np.linalg.matrix_power(smoothing, config.nu1)
    return post @ correction @ pre


def iteration_matrix(
    hierarchy: Hierarchy, level: int, b: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Dense (B, c) such that one cycle on `level` maps x0 to B x0 + c.

    B follows the recursion B_0 = 0,
    B_l = S^nu2 (I - P (I - B_{l-1}^mu) A_{l-1}^{-1} R A_l) S^nu1.
    c is the cycle applied to the zero vector, with b defaulting to the stored
    right hand side on the finest level and to zero elsewhere.
    """
    _check_oracle_size(hierarchy, level)
    dim = hierarchy.levels[level].dim
    if b is None:
        b = hierarchy.rhs if level == hierarchy.finest else np.zeros(dim)
    b = np.asarray(b, dtype=float)
    if b.shape != (dim,):
        raise ArgumentError("rhs of shape {} for level dimension {}".format(b.shape, dim))
    mat = _homogeneous_part(hierarchy, level)
    offset = mu_cycle(hierarchy, level, b, np.zeros(dim))
    return mat, offset
