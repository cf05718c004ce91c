import numpy as np
import pytest
import scipy.sparse

from igamg.assembly import (
    EllipticCoefficients,
    ProblemId,
    assemble,
    catalog,
    discretize,
    l2_error,
    l2_norm,
    residual_l2,
)
from igamg.errors import ArgumentError, GeometryError
from igamg.linalg import solve_direct
from igamg.spline import GeometryMap, SplineSpace, interpolate


def _zeros_matrix(dim):
    return lambda pts: np.zeros(pts.shape[:-1] + (dim, dim))


def test_catalog_poisson1d():
    problem = catalog("poisson1d")
    assert problem.dim == 1
    source = problem.coefficients.source(np.array([[0.25]]))
    np.testing.assert_almost_equal(source[0], (2.0 * np.pi) ** 2, decimal=12)
    assert catalog(ProblemId.poisson2d).dim == 2
    with pytest.raises(ArgumentError):
        catalog("poisson3d")


@pytest.mark.parametrize("problem_id", list(ProblemId))
def test_catalog_covers_every_problem(problem_id):
    assert catalog(problem_id).id == problem_id
    assert catalog(problem_id.value).id == problem_id


def test_annulus_source_matches_finite_differences():
    coefficients = catalog(ProblemId.full_elliptic_annulus).coefficients
    u = coefficients.exact_solution
    h = 1e-4

    def grad(pts):
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        return np.stack(
            [(u(pts + ex) - u(pts - ex)) / (2 * h), (u(pts + ey) - u(pts - ey)) / (2 * h)],
            axis=-1,
        )

    def flux(pts):
        return np.einsum("...ij,...j->...i", coefficients.diffusion(pts), grad(pts))

    rng = np.random.default_rng(0)
    radius = rng.uniform(0.3, 0.9, 10)
    angle = rng.uniform(0.1, 1.4, 10)
    pts = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    divergence = (flux(pts + ex)[:, 0] - flux(pts - ex)[:, 0]) / (2 * h) + (
        flux(pts + ey)[:, 1] - flux(pts - ey)[:, 1]
    ) / (2 * h)
    expected = (
        -divergence
        + np.sum(coefficients.advection(pts) * grad(pts), axis=-1)
        + coefficients.reaction(pts) * u(pts)
    )
    np.testing.assert_allclose(coefficients.source(pts), expected, rtol=1e-5, atol=1e-5)


def test_linear_stiffness_1d():
    system = discretize("poisson1d", 4, 1)
    expected = 4.0 * np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    np.testing.assert_allclose(system.matrix.toarray(), expected, atol=1e-13)
    assert system.symmetric
    assert system.n_unknowns == 3
    assert system.n_full == 5


@pytest.mark.parametrize("degree", [1, 2, 4])
def test_full_stiffness_row_sums_vanish(degree):
    system = discretize("poisson2d", 4, degree)
    row_sums = np.asarray(system.full_matrix.sum(axis=1)).ravel()
    np.testing.assert_allclose(row_sums, 0.0, atol=1e-11)


def test_tensor_structure_2d():
    degree, n = 2, 4
    space = SplineSpace.uniform(degree, n)
    stiffness_1d = discretize("poisson1d", n, degree).matrix
    mass_coefficients = EllipticCoefficients(
        dim=1,
        diffusion=_zeros_matrix(1),
        source=lambda pts: np.zeros(pts.shape[:-1]),
        reaction=lambda pts: np.ones(pts.shape[:-1]),
    )
    mass_1d = assemble(mass_coefficients, [space], GeometryMap.identity(1)).matrix
    expected = scipy.sparse.kron(stiffness_1d, mass_1d) + scipy.sparse.kron(mass_1d, stiffness_1d)
    system = discretize("poisson2d", n, degree)
    np.testing.assert_allclose(system.matrix.toarray(), expected.toarray(), atol=1e-12)


def test_symmetry_flags():
    assert discretize("poisson2d", 4, 2).symmetric
    assert not discretize("advection_diffusion", 4, 2).symmetric
    assert not discretize("full_elliptic_square", 4, 2).symmetric


def test_quadrature_sufficiency():
    default = discretize("poisson2d", 4, 3)
    richer = discretize("poisson2d", 4, 3, quadrature_points=6)
    np.testing.assert_allclose(
        default.matrix.toarray(), richer.matrix.toarray(), atol=1e-12 * abs(default.matrix).max()
    )


def test_l2_error_of_own_reconstruction():
    system = discretize("poisson1d", 8, 3)
    space = system.spaces[0]
    coefficients = interpolate(space, lambda t: t * (1.0 - t) * np.exp(t))
    coefficients[0] = coefficients[-1] = 0.0
    full = coefficients.copy()

    def reconstruction(pts):
        return system.quadrature.evaluate(full)

    error = l2_error(system, coefficients[1:-1], reconstruction)
    assert error < 1e-14


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_convergence_order_1d(degree):
    errors = []
    for n in (16, 32, 64):
        system = discretize("poisson1d", n, degree)
        solution = solve_direct(system.matrix, system.rhs)
        errors.append(l2_error(system, solution))
    for coarse, fine in zip(errors[:-1], errors[1:]):
        assert coarse / fine >= 2.0 ** (degree + 0.5)


def test_annulus_discretization():
    system = discretize("full_elliptic_annulus", 16, 3)
    assert not system.symmetric
    solution = solve_direct(system.matrix, system.rhs)
    assert residual_l2(system, solution) < 1e-10
    relative = l2_error(system, solution) / l2_norm(system, system.exact_solution)
    assert relative < 5e-3


def test_errors():
    system = discretize("full_elliptic_square", 4, 2)
    with pytest.raises(ArgumentError):
        l2_error(system, np.zeros(system.n_unknowns))
    with pytest.raises(ArgumentError):
        system.expand(np.zeros(system.n_unknowns + 1))

    flipped = GeometryMap((SplineSpace.uniform(1, 1),), np.array([[1.0], [0.0]]))
    coefficients = catalog("poisson1d").coefficients
    with pytest.raises(GeometryError):
        assemble(coefficients, [SplineSpace.uniform(2, 4)], flipped)
    with pytest.raises(ArgumentError):
        assemble(coefficients, [SplineSpace.uniform(2, 4)] * 2, GeometryMap.identity(2))


def _identity_diffusion(dim):
    return lambda pts: np.broadcast_to(np.eye(dim), pts.shape[:-1] + (dim, dim)).copy()


@pytest.mark.parametrize("degree", [2, 3, 4, 5])
def test_polynomial_solution_is_reproduced_1d(degree):
    # u = x^(p-1) (1 - x) lies in the spline space
    def exact(pts):
        x = pts[..., 0]
        return x ** (degree - 1) - x**degree

    def source(pts):
        x = pts[..., 0]
        return degree * (degree - 1) * x ** (degree - 2) - (degree - 1) * (
            degree - 2
        ) * x ** max(degree - 3, 0)

    coefficients = EllipticCoefficients(
        dim=1, diffusion=_identity_diffusion(1), source=source, exact_solution=exact
    )
    system = assemble(coefficients, [SplineSpace.uniform(degree, 8)], GeometryMap.identity(1))
    solution = solve_direct(system.matrix, system.rhs)
    assert l2_error(system, solution) < 1e-10


@pytest.mark.parametrize("degree", [2, 3])
def test_polynomial_solution_is_reproduced_2d(degree):
    def exact(pts):
        x, y = pts[..., 0], pts[..., 1]
        return x * (1.0 - x) * y * (1.0 - y)

    def source(pts):
        x, y = pts[..., 0], pts[..., 1]
        return 2.0 * x * (1.0 - x) + 2.0 * y * (1.0 - y)

    coefficients = EllipticCoefficients(
        dim=2, diffusion=_identity_diffusion(2), source=source, exact_solution=exact
    )
    spaces = [SplineSpace.uniform(degree, 4)] * 2
    system = assemble(coefficients, spaces, GeometryMap.identity(2))
    solution = solve_direct(system.matrix, system.rhs)
    assert l2_error(system, solution) < 1e-10
