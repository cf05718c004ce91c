"""Open-knot B-spline spaces.

Basis evaluation follows the Cox-de Boor recurrence in its triangular-table
form, so only the p+1 functions that are nonzero on a knot span are computed.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse

from igamg.errors import ArgumentError, DomainError, UnsupportedError
from igamg.utils import gauss_legendre, is_nondecreasing

logger = logging.getLogger(__name__)

UNIFORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class KnotVector:
    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if knots.ndim != 1:
            raise ArgumentError("knot vector must be one dimensional")
        if self.degree < 0:
            raise ArgumentError("degree must be nonnegative, got {}".format(self.degree))
        if not is_nondecreasing(knots):
            raise ArgumentError("knots must be nondecreasing")
        p = self.degree
        if len(knots) - p - 1 < p + 1:
            raise ArgumentError("{} knots are too few for degree {}".format(len(knots), p))
        n_first = int(np.sum(knots == knots[0]))
        n_last = int(np.sum(knots == knots[-1]))
        if n_first != p + 1 or n_last != p + 1:
            raise ArgumentError(
                "open knot vector needs end multiplicity {}, got {} and {}".format(
                    p + 1, n_first, n_last
                )
            )

    @classmethod
    def uniform(
        cls, degree: int, n_elements: int, lower: float = 0.0, upper: float = 1.0
    ) -> "KnotVector":
        if n_elements < 1:
            raise ArgumentError("at least one element is required")
        inner = np.linspace(lower, upper, n_elements + 1)
        knots = np.concatenate([np.full(degree, lower), inner, np.full(degree, upper)])
        return cls(knots, degree)

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knots)

    @property
    def span_indices(self) -> np.ndarray:
        """indices j with knots[j] < knots[j+1]"""
        return np.nonzero(self.knots[1:] > self.knots[:-1])[0]

    @property
    def n_elements(self) -> int:
        return len(self.span_indices)

    def is_uniform(self) -> bool:
        reference = KnotVector.uniform(
            self.degree, self.n_elements, self.knots[0], self.knots[-1]
        ).knots
        if len(reference) != len(self.knots):
            return False
        scale = self.knots[-1] - self.knots[0]
        return bool(np.max(np.abs(reference - self.knots)) <= UNIFORM_TOL * scale)

    def __repr__(self):
        return "KnotVector(p={}, n_elements={}, n_basis={})".format(
            self.degree, self.n_elements, self.n_basis
        )


@dataclass(frozen=True, eq=False)
class SplineSpace:
    knot_vector: KnotVector

    @classmethod
    def uniform(cls, degree: int, n_elements: int) -> "SplineSpace":
        return cls(KnotVector.uniform(degree, n_elements))

    @property
    def degree(self) -> int:
        return self.knot_vector.degree

    @property
    def n_basis(self) -> int:
        return self.knot_vector.n_basis

    @property
    def n_elements(self) -> int:
        return self.knot_vector.n_elements

    @property
    def knots(self) -> np.ndarray:
        return self.knot_vector.knots

    def __repr__(self):
        return "SplineSpace(p={}, n_elements={})".format(self.degree, self.n_elements)


def find_span(kv: KnotVector, t: float) -> int:
    knots = kv.knots
    if not (knots[0] <= t <= knots[-1]):
        raise DomainError("{} is outside [{}, {}]".format(t, knots[0], knots[-1]))
    if t >= knots[-1]:
        return int(kv.span_indices[-1])
    return int(np.searchsorted(knots, t, side="right") - 1)


def _basis_funs(knots: np.ndarray, p: int, span: int, t: float) -> np.ndarray:
    values = np.zeros(p + 1)
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    values[0] = 1.0
    for j in range(1, p + 1):
        left[j] = t - knots[span + 1 - j]
        right[j] = knots[span + j] - t
        saved = 0.0
        for r in range(j):
            temp = values[r] / (right[r + 1] + left[j - r])
            values[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        values[j] = saved
    return values


def _ders_basis_funs(knots: np.ndarray, p: int, span: int, t: float, n: int) -> np.ndarray:
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = t - knots[span + 1 - j]
        right[j] = knots[span + j] - t
        saved = 0.0
        for r in range(j):
            # lower triangle holds the knot differences
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n + 1, p + 1))
    ders[0, :] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, n + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    factor = float(p)
    for k in range(1, n + 1):
        ders[k, :] *= factor
        factor *= p - k
    return ders


def eval_basis(space: SplineSpace, t: float) -> Tuple[int, np.ndarray]:
    """Return the span index j and the values of N_{j-p}, ..., N_j at t."""
    span = find_span(space.knot_vector, t)
    return span, _basis_funs(space.knots, space.degree, span, t)


def eval_basis_derivatives(space: SplineSpace, t: float, max_order: int) -> np.ndarray:
    """Row k holds the k-th derivatives of the p+1 nonvanishing basis functions."""
    if max_order < 0 or max_order > space.degree:
        raise ArgumentError(
            "derivative order {} not in [0, {}]".format(max_order, space.degree)
        )
    span = find_span(space.knot_vector, t)
    return _ders_basis_funs(space.knots, space.degree, span, t, max_order)


def collocation_matrix(
    space: SplineSpace, points: np.ndarray, order: int = 0
) -> scipy.sparse.csr_matrix:
    points = np.asarray(points, dtype=float).ravel()
    p = space.degree
    if order > p:
        return scipy.sparse.csr_matrix((len(points), space.n_basis))
    rows = np.repeat(np.arange(len(points)), p + 1)
    cols = np.zeros((len(points), p + 1), dtype=int)
    vals = np.zeros((len(points), p + 1))
    for i, t in enumerate(points):
        span = find_span(space.knot_vector, t)
        cols[i] = np.arange(span - p, span + 1)
        vals[i] = _ders_basis_funs(space.knots, p, span, t, order)[order]
    mat = scipy.sparse.coo_matrix(
        (vals.ravel(), (rows, cols.ravel())), shape=(len(points), space.n_basis)
    )
    return mat.tocsr()


def greville_abscissae(space: SplineSpace) -> np.ndarray:
    knots = space.knots
    p = space.degree
    if p == 0:
        return 0.5 * (knots[1:] + knots[:-1])
    averages = np.array([np.mean(knots[i + 1 : i + p + 1]) for i in range(space.n_basis)])
    return np.clip(averages, knots[0], knots[-1])


def interpolate(space: SplineSpace, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Coefficients of the spline interpolating func at the Greville abscissae."""
    points = greville_abscissae(space)
    mat = collocation_matrix(space, points).toarray()
    return np.linalg.solve(mat, np.asarray(func(points), dtype=float))


def evaluate(space: SplineSpace, coefficients: np.ndarray, points: np.ndarray) -> np.ndarray:
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape[0] != space.n_basis:
        raise ArgumentError(
            "{} coefficients for {} basis functions".format(coefficients.shape[0], space.n_basis)
        )
    return collocation_matrix(space, points) @ coefficients


@dataclass(frozen=True, eq=False)
class ElementQuadrature:
    """Gauss rule on every nonempty span of a space, with the basis sampled on it.

    Arrays are indexed (element, point[, local basis]); `first` holds the global
    index of the first nonvanishing basis function per element.
    """

    space: SplineSpace
    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    first: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.points.shape[0]

    @property
    def n_points(self) -> int:
        return self.points.shape[1]

    def collocation(self, order: int = 0) -> scipy.sparse.csr_matrix:
        """sparse matrix from coefficients to the flattened quadrature points"""
        n_el, n_q, n_loc = self.values.shape
        table = self.values if order == 0 else self.derivatives
        rows = np.repeat(np.arange(n_el * n_q), n_loc)
        cols = (self.first[:, None, None] + np.arange(n_loc)[None, None, :]).repeat(n_q, axis=1)
        mat = scipy.sparse.coo_matrix(
            (table.ravel(), (rows, cols.ravel())), shape=(n_el * n_q, self.space.n_basis)
        )
        return mat.tocsr()


def element_quadrature(space: SplineSpace, n_points: Optional[int] = None) -> ElementQuadrature:
    p = space.degree
    n_q = p + 1 if n_points is None else n_points
    nodes, node_weights = gauss_legendre(n_q)
    spans = space.knot_vector.span_indices
    knots = space.knots
    n_el = len(spans)

    points = np.zeros((n_el, n_q))
    weights = np.zeros((n_el, n_q))
    values = np.zeros((n_el, n_q, p + 1))
    derivatives = np.zeros((n_el, n_q, p + 1))
    for e, span in enumerate(spans):
        lower, upper = knots[span], knots[span + 1]
        half = 0.5 * (upper - lower)
        points[e] = lower + half * (nodes + 1.0)
        weights[e] = half * node_weights
        for k, t in enumerate(points[e]):
            ders = _ders_basis_funs(knots, p, span, t, min(1, p))
            values[e, k] = ders[0]
            if p > 0:
                derivatives[e, k] = ders[1]
    return ElementQuadrature(space, points, weights, values, derivatives, spans - p)


def dyadic_refine(space: SplineSpace) -> Tuple[SplineSpace, scipy.sparse.csr_matrix]:
    """Bisect every element; return the fine space and the two-scale matrix.

    Column i of the matrix holds the fine coefficients of coarse basis function i,
    obtained by inserting the element midpoints one at a time.
    """
    kv = space.knot_vector
    if kv.n_elements < 1:
        raise ArgumentError("space has no elements")
    if not kv.is_uniform():
        raise UnsupportedError("dyadic refinement needs uniform open knots")
    p = kv.degree
    breaks = kv.breakpoints
    midpoints = 0.5 * (breaks[1:] + breaks[:-1])

    knots = kv.knots.copy()
    two_scale = np.eye(kv.n_basis)
    for u in midpoints:
        k = int(np.searchsorted(knots, u, side="right") - 1)
        n = len(knots) - p - 1
        alpha = np.zeros(n + 1)
        alpha[: k - p + 1] = 1.0
        for i in range(k - p + 1, k + 1):
            alpha[i] = (u - knots[i]) / (knots[i + p] - knots[i])
        upper = np.vstack([two_scale, np.zeros((1, two_scale.shape[1]))])
        lower = np.vstack([np.zeros((1, two_scale.shape[1])), two_scale])
        two_scale = alpha[:, None] * upper + (1.0 - alpha)[:, None] * lower
        knots = np.insert(knots, k + 1, u)

    fine = SplineSpace(KnotVector.uniform(p, 2 * kv.n_elements, kv.knots[0], kv.knots[-1]))
    assert np.allclose(fine.knots, knots, rtol=0.0, atol=1e-12)
    mat = scipy.sparse.csr_matrix(two_scale)
    mat.eliminate_zeros()
    return fine, mat


@dataclass(frozen=True, eq=False)
class GeometryMap:
    """Tensor-product B-spline map from the parametric box to physical space.

    `control_points` has shape (n_1, dim) in 1D and (n_1, n_2, dim) in 2D.
    """

    spaces: Tuple[SplineSpace, ...]
    control_points: np.ndarray
    max_deviation: Optional[float] = field(default=None)

    def __post_init__(self):
        expected = tuple(s.n_basis for s in self.spaces) + (len(self.spaces),)
        if self.control_points.shape != expected:
            raise ArgumentError(
                "control points of shape {}, expected {}".format(
                    self.control_points.shape, expected
                )
            )

    @classmethod
    def identity(cls, dim: int) -> "GeometryMap":
        space = SplineSpace.uniform(1, 1)
        if dim == 1:
            return cls((space,), np.array([[0.0], [1.0]]))
        if dim == 2:
            grid = np.array([[[0.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]]])
            return cls((space, space), grid)
        raise ArgumentError("only 1D and 2D geometries are supported, got {}".format(dim))

    @property
    def dim(self) -> int:
        return len(self.spaces)

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(s.degree for s in self.spaces)

    def evaluate(self, params: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """Map a tensor grid of parameters.

        Returns points of shape (n_1, [n_2,] dim) and Jacobians of shape
        (n_1, [n_2,] dim, dim) with jac[..., c, k] = d x_c / d xi_k.
        """
        if len(params) != self.dim:
            raise ArgumentError("expected {} parameter arrays".format(self.dim))
        values = [collocation_matrix(s, t).toarray() for s, t in zip(self.spaces, params)]
        slopes = [collocation_matrix(s, t, 1).toarray() for s, t in zip(self.spaces, params)]
        cp = self.control_points
        if self.dim == 1:
            points = values[0] @ cp
            jac = (slopes[0] @ cp)[:, :, None]
            return points, jac

        n1, n2 = len(params[0]), len(params[1])
        points = np.zeros((n1, n2, 2))
        jac = np.zeros((n1, n2, 2, 2))
        for c in range(2):
            coef = cp[:, :, c]
            points[:, :, c] = values[0] @ coef @ values[1].T
            jac[:, :, c, 0] = slopes[0] @ coef @ values[1].T
            jac[:, :, c, 1] = values[0] @ coef @ slopes[1].T
        return points, jac


def fit_annulus_geometry(
    degree: int,
    n_elements: int,
    inner_radius: float = 0.2,
    outer_radius: float = 1.0,
) -> GeometryMap:
    """Quarter annulus by interpolating the polar map at the Greville grid.

    The first parametric direction is radial, the second angular. The radial
    edges are linear in the parameter, so their control points are set to the
    exact values.
    """
    if degree < 2:
        raise ArgumentError("a curved boundary needs degree >= 2, got {}".format(degree))
    space = SplineSpace.uniform(degree, n_elements)
    greville = greville_abscissae(space)
    radius = inner_radius + (outer_radius - inner_radius) * greville
    angle = 0.5 * np.pi * greville

    colloc = collocation_matrix(space, greville).toarray()
    control_points = np.zeros((space.n_basis, space.n_basis, 2))
    for c, target in enumerate(
        [np.outer(radius, np.cos(angle)), np.outer(radius, np.sin(angle))]
    ):
        half = np.linalg.solve(colloc, target)
        control_points[:, :, c] = np.linalg.solve(colloc, half.T).T
    control_points[:, 0, 0] = radius
    control_points[:, 0, 1] = 0.0
    control_points[:, -1, 0] = 0.0
    control_points[:, -1, 1] = radius

    geometry = GeometryMap((space, space), control_points)
    samples = np.linspace(0.0, 1.0, 41)
    points, _ = geometry.evaluate([samples, samples])
    exact_radius = inner_radius + (outer_radius - inner_radius) * samples
    deviation = float(
        np.max(np.abs(np.linalg.norm(points, axis=-1) - exact_radius[:, None]))
    )
    logger.debug(
        "annulus fit p={} n={} max radial deviation {:.3e}".format(degree, n_elements, deviation)
    )
    return GeometryMap((space, space), control_points, deviation)
