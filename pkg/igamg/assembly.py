import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse

from igamg.errors import ArgumentError, GeometryError
from igamg.linalg import SparseMatrix, as_csr, is_symmetric, spmv
from igamg.spline import (
    ElementQuadrature,
    GeometryMap,
    SplineSpace,
    element_quadrature,
    fit_annulus_geometry,
)

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]

ANNULUS_INNER_RADIUS = 0.2
ANNULUS_OUTER_RADIUS = 1.0
ADVECTION_DIFFUSION_EPSILON = 0.1
WAVENUMBER = 1


class ProblemId(Enum):
    poisson1d = "poisson1d"
    poisson2d = "poisson2d"
    full_elliptic_square = "full_elliptic_square"
    advection_diffusion = "advection_diffusion"
    full_elliptic_annulus = "full_elliptic_annulus"

    @classmethod
    def from_name(cls, name: Union[str, "ProblemId"]) -> "ProblemId":
        if isinstance(name, ProblemId):
            return name
        try:
            return cls(name)
        except ValueError:
            raise ArgumentError("unknown problem {}".format(name))


class Domain(Enum):
    unit_interval = "unit_interval"
    unit_square = "unit_square"
    quarter_annulus = "quarter_annulus"


@dataclass(frozen=True)
class EllipticCoefficients:
    """-div(A grad u) + B . grad u + c u = f with u = 0 on the boundary.

    Every function takes points of shape (..., dim). A returns (..., dim, dim),
    B returns (..., dim), c, f and the exact solution return (...).
    """

    dim: int
    diffusion: PointFunction
    source: PointFunction
    advection: Optional[PointFunction] = None
    reaction: Optional[PointFunction] = None
    exact_solution: Optional[PointFunction] = None


@dataclass(frozen=True)
class Problem:
    id: ProblemId
    coefficients: EllipticCoefficients
    domain: Domain

    @property
    def dim(self) -> int:
        return self.coefficients.dim


def _constant_matrix(mat: np.ndarray) -> PointFunction:
    def func(pts: np.ndarray) -> np.ndarray:
        return np.broadcast_to(mat, pts.shape[:-1] + mat.shape).copy()

    return func


def _constant(value: float) -> PointFunction:
    def func(pts: np.ndarray) -> np.ndarray:
        return np.full(pts.shape[:-1], value)

    return func


def _variable_diffusion(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    a11 = (2.0 + np.cos(x)) * (1.0 + y)
    a12 = np.cos(x + y) * np.sin(x + y)
    a22 = (2.0 + np.sin(y)) * (1.0 + x)
    return np.stack([np.stack([a11, a12], axis=-1), np.stack([a12, a22], axis=-1)], axis=-2)


def _square_advection(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    cos2 = np.cos(x + y) ** 2
    b1 = 11.0 + np.sin(x) + y * np.sin(x) - 2.0 * cos2
    b2 = -9.0 - np.cos(y) - x * np.cos(y) - 2.0 * cos2
    return np.stack([b1, b2], axis=-1)


def _rotation_advection(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([-5.0 * y, 5.0 * x], axis=-1)


def _annulus_reaction(pts: np.ndarray) -> np.ndarray:
    return pts[..., 0] * pts[..., 1]


def _annulus_solution(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    r2 = x * x + y * y
    inner2 = ANNULUS_INNER_RADIUS**2
    outer2 = ANNULUS_OUTER_RADIUS**2
    return (r2 - inner2) * (r2 - outer2) * np.sin(x) * np.sin(y)


def _annulus_source(pts: np.ndarray) -> np.ndarray:
    """f = -div(A grad u) + B . grad u + c u for the manufactured annulus solution"""
    x, y = pts[..., 0], pts[..., 1]
    inner2 = ANNULUS_INNER_RADIUS**2
    outer2 = ANNULUS_OUTER_RADIUS**2
    r2 = x * x + y * y
    g = (r2 - inner2) * (r2 - outer2)
    m = 2.0 * r2 - inner2 - outer2
    gx, gy = 2.0 * x * m, 2.0 * y * m
    gxx, gyy, gxy = 2.0 * m + 8.0 * x * x, 2.0 * m + 8.0 * y * y, 8.0 * x * y

    s = np.sin(x) * np.sin(y)
    sx, sy = np.cos(x) * np.sin(y), np.sin(x) * np.cos(y)
    sxy = np.cos(x) * np.cos(y)

    u = g * s
    ux = gx * s + g * sx
    uy = gy * s + g * sy
    uxx = gxx * s + 2.0 * gx * sx - g * s
    uyy = gyy * s + 2.0 * gy * sy - g * s
    uxy = gxy * s + gx * sy + gy * sx + g * sxy

    a11 = (2.0 + np.cos(x)) * (1.0 + y)
    a12 = np.cos(x + y) * np.sin(x + y)
    a22 = (2.0 + np.sin(y)) * (1.0 + x)
    a11_x = -np.sin(x) * (1.0 + y)
    a12_x = np.cos(2.0 * (x + y))
    a12_y = np.cos(2.0 * (x + y))
    a22_y = np.cos(y) * (1.0 + x)

    divergence = (
        a11_x * ux + a11 * uxx + a12 * uxy + a12_x * uy
        + a12_y * ux + a12 * uxy + a22_y * uy + a22 * uyy
    )  # fmt: skip
    return -divergence - 5.0 * y * ux + 5.0 * x * uy + x * y * u


def catalog(problem_id: Union[str, ProblemId]) -> Problem:
    pid = ProblemId.from_name(problem_id)
    wave = 2.0 * WAVENUMBER * np.pi

    if pid == ProblemId.poisson1d:
        coefficients = EllipticCoefficients(
            dim=1,
            diffusion=_constant_matrix(np.eye(1)),
            source=lambda pts: wave**2 * np.sin(wave * pts[..., 0]),
            exact_solution=lambda pts: np.sin(wave * pts[..., 0]),
        )
        return Problem(pid, coefficients, Domain.unit_interval)

    if pid == ProblemId.poisson2d:
        coefficients = EllipticCoefficients(
            dim=2,
            diffusion=_constant_matrix(np.eye(2)),
            source=lambda pts: 2.0
            * wave**2
            * np.sin(wave * pts[..., 0])
            * np.sin(wave * pts[..., 1]),
            exact_solution=lambda pts: np.sin(wave * pts[..., 0]) * np.sin(wave * pts[..., 1]),
        )
        return Problem(pid, coefficients, Domain.unit_square)

    if pid == ProblemId.full_elliptic_square:
        coefficients = EllipticCoefficients(
            dim=2,
            diffusion=_variable_diffusion,
            source=_constant(1.0),
            advection=_square_advection,
            reaction=_constant(1.0),
        )
        return Problem(pid, coefficients, Domain.unit_square)

    if pid == ProblemId.advection_diffusion:
        coefficients = EllipticCoefficients(
            dim=2,
            diffusion=_constant_matrix(ADVECTION_DIFFUSION_EPSILON * np.eye(2)),
            source=_constant(1.0),
            advection=lambda pts: np.broadcast_to(
                np.array([1.0, 1.0]), pts.shape[:-1] + (2,)
            ).copy(),
        )
        return Problem(pid, coefficients, Domain.unit_square)

    assert pid == ProblemId.full_elliptic_annulus
    coefficients = EllipticCoefficients(
        dim=2,
        diffusion=_variable_diffusion,
        source=_annulus_source,
        advection=_rotation_advection,
        reaction=_annulus_reaction,
        exact_solution=_annulus_solution,
    )
    return Problem(pid, coefficients, Domain.quarter_annulus)


@dataclass(frozen=True, eq=False)
class ErrorQuadrature:
    """Physical quadrature points and weights over the whole mesh."""

    quadratures: Tuple[ElementQuadrature, ...]
    collocations: Tuple[scipy.sparse.csr_matrix, ...]
    points: np.ndarray  # (M_1, [M_2,] dim)
    weights: np.ndarray  # (M_1, [M_2])

    def evaluate(self, full_coefficients: np.ndarray) -> np.ndarray:
        if len(self.collocations) == 1:
            return self.collocations[0] @ full_coefficients
        n1 = self.collocations[0].shape[1]
        n2 = self.collocations[1].shape[1]
        grid = full_coefficients.reshape(n1, n2)
        return np.asarray((self.collocations[1] @ (self.collocations[0] @ grid).T).T)

    def integrate_square(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values**2))


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    matrix: SparseMatrix
    rhs: np.ndarray
    spaces: Tuple[SplineSpace, ...]
    geometry: GeometryMap
    interior: np.ndarray
    full_matrix: SparseMatrix
    full_rhs: np.ndarray
    coefficients: EllipticCoefficients
    quadrature: ErrorQuadrature
    symmetric: bool

    @property
    def dim(self) -> int:
        return len(self.spaces)

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_full(self) -> int:
        return self.full_matrix.shape[0]

    @property
    def degree(self) -> int:
        return self.spaces[0].degree

    @property
    def n_elements(self) -> Tuple[int, ...]:
        return tuple(s.n_elements for s in self.spaces)

    @property
    def exact_solution(self) -> Optional[PointFunction]:
        return self.coefficients.exact_solution

    def expand(self, coefficients: np.ndarray) -> np.ndarray:
        """insert the eliminated (zero) boundary coefficients"""
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (self.n_unknowns,):
            raise ArgumentError(
                "{} coefficients for {} unknowns".format(coefficients.shape, self.n_unknowns)
            )
        full = np.zeros(self.n_full)
        full[self.interior] = coefficients
        return full

    def __repr__(self):
        return "DiscreteSystem(n_elements={}, p={}, n_unknowns={})".format(
            self.n_elements, self.degree, self.n_unknowns
        )


def interior_indices(spaces: Sequence[SplineSpace]) -> np.ndarray:
    """row-major indices of the basis functions that vanish on the boundary"""
    if len(spaces) == 1:
        return np.arange(1, spaces[0].n_basis - 1)
    n1, n2 = spaces[0].n_basis, spaces[1].n_basis
    i1, i2 = np.meshgrid(np.arange(1, n1 - 1), np.arange(1, n2 - 1), indexing="ij")
    return (i1 * n2 + i2).ravel()


def _check_coefficients(diffusion: np.ndarray, reaction: Optional[np.ndarray]) -> None:
    asymmetry = np.max(np.abs(diffusion - np.swapaxes(diffusion, -1, -2)))
    if asymmetry > 1e-12 * max(np.max(np.abs(diffusion)), 1.0):
        logger.warning("diffusion matrix is not symmetric (max deviation {:.3e})".format(asymmetry))
    if reaction is not None and np.min(reaction) < 0.0:
        logger.warning("reaction coefficient is negative (min {:.3e})".format(np.min(reaction)))


def _local_matrices(
    values: np.ndarray,
    grads: np.ndarray,
    weights: np.ndarray,
    diffusion: np.ndarray,
    advection: Optional[np.ndarray],
    reaction: Optional[np.ndarray],
    source: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Element matrices and load vectors for a batch of elements.

    values (e, q, a), grads (e, q, a, d), weights/reaction/source (e, q),
    diffusion (e, q, d, d), advection (e, q, d). Row a is the test function.
    """
    n_el, n_q, n_loc, dim = grads.shape
    weighted = grads * weights[:, :, None, None]
    flux = np.einsum("eqij,eqbj->eqbi", diffusion, grads)
    left = np.transpose(weighted, (0, 2, 1, 3)).reshape(n_el, n_loc, n_q * dim)
    right = np.transpose(flux, (0, 2, 1, 3)).reshape(n_el, n_loc, n_q * dim)
    local = left @ np.transpose(right, (0, 2, 1))

    test = np.transpose(values * weights[:, :, None], (0, 2, 1))
    if advection is not None:
        transport = np.einsum("eqi,eqbi->eqb", advection, grads)
        local += test @ transport
    if reaction is not None:
        local += test @ (values * reaction[:, :, None])
    load = np.einsum("eaq,eq->ea", test, source)
    return local, load


def _coefficient_arrays(coefficients: EllipticCoefficients, points: np.ndarray):
    diffusion = np.asarray(coefficients.diffusion(points), dtype=float)
    advection = None
    if coefficients.advection is not None:
        advection = np.asarray(coefficients.advection(points), dtype=float)
    reaction = None
    if coefficients.reaction is not None:
        reaction = np.asarray(coefficients.reaction(points), dtype=float)
    source = np.asarray(coefficients.source(points), dtype=float)
    _check_coefficients(diffusion, reaction)
    return diffusion, advection, reaction, source


def _assemble_1d(
    coefficients: EllipticCoefficients, quad: ElementQuadrature, geometry: GeometryMap
):
    points, jac = geometry.evaluate([quad.points.ravel()])
    det = jac[:, 0, 0]
    if np.any(det <= 0.0):
        raise GeometryError("nonpositive jacobian at {} quadrature points".format(np.sum(det <= 0)))
    n_el, n_q = quad.points.shape
    n_loc = quad.values.shape[2]
    weights = quad.weights * det.reshape(n_el, n_q)
    diffusion, advection, reaction, source = _coefficient_arrays(coefficients, points)

    grads = (quad.derivatives / det.reshape(n_el, n_q)[:, :, None])[..., None]
    local, load = _local_matrices(
        quad.values,
        grads,
        weights,
        diffusion.reshape(n_el, n_q, 1, 1),
        None if advection is None else advection.reshape(n_el, n_q, 1),
        None if reaction is None else reaction.reshape(n_el, n_q),
        source.reshape(n_el, n_q),
    )
    dofs = quad.first[:, None] + np.arange(n_loc)[None, :]
    rows = np.repeat(dofs[:, :, None], n_loc, axis=2)
    cols = np.repeat(dofs[:, None, :], n_loc, axis=1)
    weights_grid = weights.ravel()
    return [(rows.ravel(), cols.ravel(), local.ravel())], [(dofs.ravel(), load.ravel())], (
        points,
        weights_grid,
    )


def _assemble_2d(
    coefficients: EllipticCoefficients,
    quads: Tuple[ElementQuadrature, ElementQuadrature],
    geometry: GeometryMap,
    n2_basis: int,
):
    q1, q2 = quads
    points, jac = geometry.evaluate([q1.points.ravel(), q2.points.ravel()])
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if np.any(det <= 0.0):
        raise GeometryError("nonpositive jacobian at {} quadrature points".format(np.sum(det <= 0)))
    jac_inv = np.linalg.inv(jac)
    weights = np.outer(q1.weights.ravel(), q2.weights.ravel()) * det
    diffusion, advection, reaction, source = _coefficient_arrays(coefficients, points)

    n_el1, n_q1 = q1.points.shape
    n_el2, n_q2 = q2.points.shape
    n_loc1, n_loc2 = q1.values.shape[2], q2.values.shape[2]

    def block(arr: Optional[np.ndarray], e1: int) -> Optional[np.ndarray]:
        # (n_q1, M_2, ...) -> (n_el2, n_q1 * n_q2, ...)
        if arr is None:
            return None
        part = arr[e1 * n_q1 : (e1 + 1) * n_q1]
        tail = part.shape[2:]
        part = part.reshape((n_q1, n_el2, n_q2) + tail)
        part = np.moveaxis(part, 1, 0)
        return part.reshape((n_el2, n_q1 * n_q2) + tail)

    dofs2 = q2.first[:, None] + np.arange(n_loc2)[None, :]
    matrix_parts = []
    load_parts = []
    for e1 in range(n_el1):
        v1, d1 = q1.values[e1], q1.derivatives[e1]
        values = np.einsum("ia,ejb->eijab", v1, q2.values).reshape(n_el2, -1, n_loc1 * n_loc2)
        grad_s = np.einsum("ia,ejb->eijab", d1, q2.values).reshape(values.shape)
        grad_t = np.einsum("ia,ejb->eijab", v1, q2.derivatives).reshape(values.shape)
        ref_grads = np.stack([grad_s, grad_t], axis=-1)
        grads = np.einsum("eqaj,eqji->eqai", ref_grads, block(jac_inv, e1))

        local, load = _local_matrices(
            values,
            grads,
            block(weights, e1),
            block(diffusion, e1),
            block(advection, e1),
            block(reaction, e1),
            block(source, e1),
        )
        dofs1 = q1.first[e1] + np.arange(n_loc1)
        dofs = (dofs1[None, :, None] * n2_basis + dofs2[:, None, :]).reshape(n_el2, -1)
        n_loc = dofs.shape[1]
        rows = np.repeat(dofs[:, :, None], n_loc, axis=2)
        cols = np.repeat(dofs[:, None, :], n_loc, axis=1)
        matrix_parts.append((rows.ravel(), cols.ravel(), local.ravel()))
        load_parts.append((dofs.ravel(), load.ravel()))
    return matrix_parts, load_parts, (points, weights)


def assemble(
    coefficients: EllipticCoefficients,
    spaces: Sequence[SplineSpace],
    geometry: GeometryMap,
    quadrature_points: Optional[int] = None,
) -> DiscreteSystem:
    spaces = tuple(spaces)
    if len(spaces) != coefficients.dim or geometry.dim != coefficients.dim:
        raise ArgumentError(
            "dimension mismatch: {} spaces, {}D geometry, {}D problem".format(
                len(spaces), geometry.dim, coefficients.dim
            )
        )
    for space in spaces:
        if space.degree < 1 or space.n_basis < 3:
            raise ArgumentError("{} has no interior unknowns".format(space))

    quads = tuple(element_quadrature(s, quadrature_points) for s in spaces)
    n_full = int(np.prod([s.n_basis for s in spaces]))
    if len(spaces) == 1:
        matrix_parts, load_parts, (points, weights) = _assemble_1d(
            coefficients, quads[0], geometry
        )
    else:
        matrix_parts, load_parts, (points, weights) = _assemble_2d(
            coefficients, (quads[0], quads[1]), geometry, spaces[1].n_basis
        )

    # accumulation follows the fixed element order
    rows = np.concatenate([part[0] for part in matrix_parts])
    cols = np.concatenate([part[1] for part in matrix_parts])
    vals = np.concatenate([part[2] for part in matrix_parts])
    full_matrix = as_csr(scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n_full, n_full)))
    full_rhs = np.zeros(n_full)
    for dofs, load in load_parts:
        np.add.at(full_rhs, dofs, load)

    interior = interior_indices(spaces)
    matrix = as_csr(full_matrix[interior][:, interior])
    rhs = full_rhs[interior]

    quadrature = ErrorQuadrature(
        quads, tuple(q.collocation() for q in quads), np.asarray(points), np.asarray(weights)
    )
    system = DiscreteSystem(
        matrix=matrix,
        rhs=rhs,
        spaces=spaces,
        geometry=geometry,
        interior=interior,
        full_matrix=full_matrix,
        full_rhs=full_rhs,
        coefficients=coefficients,
        quadrature=quadrature,
        symmetric=is_symmetric(matrix),
    )
    logger.debug("assembled {}".format(system))
    return system


def discretize(
    problem_id: Union[str, ProblemId],
    n_elements: int,
    degree: int,
    quadrature_points: Optional[int] = None,
) -> DiscreteSystem:
    problem = catalog(problem_id)
    spaces = tuple(SplineSpace.uniform(degree, n_elements) for _ in range(problem.dim))
    if problem.domain == Domain.quarter_annulus:
        geometry = fit_annulus_geometry(
            max(degree, 2), n_elements, ANNULUS_INNER_RADIUS, ANNULUS_OUTER_RADIUS
        )
    else:
        geometry = GeometryMap.identity(problem.dim)
    logger.info(
        "discretizing {} with {} elements per direction, p={}".format(
            problem.id.value, n_elements, degree
        )
    )
    return assemble(problem.coefficients, spaces, geometry, quadrature_points)


def l2_norm(system: DiscreteSystem, func: PointFunction) -> float:
    values = func(system.quadrature.points)
    return float(np.sqrt(system.quadrature.integrate_square(values)))


def l2_error(
    system: DiscreteSystem,
    coefficients: np.ndarray,
    exact: Optional[PointFunction] = None,
) -> float:
    """sqrt of the integral of (u_h - u)^2 by Gauss quadrature over all elements"""
    exact = system.exact_solution if exact is None else exact
    if exact is None:
        raise ArgumentError("no exact solution available")
    full = system.expand(coefficients)
    discrete = system.quadrature.evaluate(full)
    reference = exact(system.quadrature.points)
    return float(np.sqrt(system.quadrature.integrate_square(discrete - reference)))


def residual_l2(system: DiscreteSystem, candidate: np.ndarray) -> float:
    """Euclidean norm of b - A x"""
    return float(np.linalg.norm(system.rhs - spmv(system.matrix, candidate)))
