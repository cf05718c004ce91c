import numpy as np
import pytest

from igamg.errors import ArgumentError, DomainError, UnsupportedError
from igamg.spline import (
    GeometryMap,
    KnotVector,
    SplineSpace,
    collocation_matrix,
    dyadic_refine,
    element_quadrature,
    eval_basis,
    eval_basis_derivatives,
    evaluate,
    find_span,
    fit_annulus_geometry,
    greville_abscissae,
    interpolate,
)


def test_knot_vector_uniform():
    kv = KnotVector.uniform(2, 4)
    np.testing.assert_almost_equal(
        kv.knots, [0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0], decimal=14
    )
    assert kv.n_basis == 6
    assert kv.n_elements == 4
    assert kv.is_uniform()


def test_knot_vector_invalid():
    with pytest.raises(ArgumentError):
        KnotVector(np.array([0.0, 0.5, 0.2, 1.0]), 0)
    with pytest.raises(ArgumentError):
        KnotVector(np.array([0.0, 0.0, 0.5, 1.0, 1.0, 1.0]), 2)
    with pytest.raises(ArgumentError):
        KnotVector.uniform(2, 0)


def test_find_span():
    kv = KnotVector.uniform(2, 4)
    assert find_span(kv, 0.0) == 2
    assert find_span(kv, 0.3) == 3
    assert find_span(kv, 0.5) == 4
    assert find_span(kv, 1.0) == 5  # last nonempty span
    with pytest.raises(DomainError):
        find_span(kv, 1.0 + 1e-9)
    with pytest.raises(DomainError):
        find_span(kv, -0.1)


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 5])
def test_partition_of_unity_and_nonnegativity(degree):
    space = SplineSpace.uniform(degree, 7)
    rng = np.random.default_rng(0)
    points = np.concatenate([rng.uniform(0.0, 1.0, 50), [0.0, 1.0]])
    for t in points:
        _, values = eval_basis(space, t)
        assert len(values) == degree + 1
        assert np.all(values >= -1e-15)
        np.testing.assert_almost_equal(np.sum(values), 1.0, decimal=13)


def test_compact_support():
    space = SplineSpace.uniform(3, 8)
    rng = np.random.default_rng(1)
    knots = space.knots
    for i in range(space.n_basis):
        ts = rng.uniform(0.0, 1.0, 100)
        col = collocation_matrix(space, ts).toarray()[:, i]
        outside = (ts < knots[i]) | (ts > knots[i + 4])
        assert np.all(col[outside] == 0.0)


def test_boundary_interpolatory():
    space = SplineSpace.uniform(4, 5)
    mat = collocation_matrix(space, np.array([0.0, 1.0])).toarray()
    np.testing.assert_almost_equal(mat[0], np.eye(space.n_basis)[0], decimal=14)
    np.testing.assert_almost_equal(mat[1], np.eye(space.n_basis)[-1], decimal=14)


@pytest.mark.parametrize("degree", [1, 2, 4])
def test_derivatives_against_finite_differences(degree):
    space = SplineSpace.uniform(degree, 5)
    coefficients = np.random.default_rng(2).standard_normal(space.n_basis)
    eps = 1e-6
    points = np.array([0.13, 0.37, 0.61, 0.88])
    slopes = collocation_matrix(space, points, order=1) @ coefficients
    forward = evaluate(space, coefficients, points + eps)
    backward = evaluate(space, coefficients, points - eps)
    diffs = forward - backward
    np.testing.assert_allclose(slopes, diffs / (2 * eps), rtol=1e-6, atol=1e-6)

    for t in points:
        table = eval_basis_derivatives(space, t, 1)
        np.testing.assert_almost_equal(np.sum(table[1]), 0.0, decimal=10)


def test_derivative_order_limits():
    space = SplineSpace.uniform(2, 3)
    with pytest.raises(ArgumentError):
        eval_basis_derivatives(space, 0.5, 3)
    assert collocation_matrix(space, np.array([0.2, 0.7]), order=3).nnz == 0


def test_greville():
    space = SplineSpace.uniform(2, 4)
    np.testing.assert_almost_equal(
        greville_abscissae(space), [0.0, 0.125, 0.375, 0.625, 0.875, 1.0], decimal=14
    )


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_interpolate_reproduces_polynomials(degree):
    space = SplineSpace.uniform(degree, 6)
    poly = np.polynomial.Polynomial(np.arange(1.0, degree + 2.0))
    coefficients = interpolate(space, poly)
    points = np.linspace(0.0, 1.0, 23)
    np.testing.assert_allclose(evaluate(space, coefficients, points), poly(points), atol=1e-12)


@pytest.mark.parametrize("degree", [1, 2, 3, 5])
def test_dyadic_refine_two_scale_exactness(degree):
    coarse = SplineSpace.uniform(degree, 4)
    fine, two_scale = dyadic_refine(coarse)
    assert fine.n_elements == 8
    assert two_scale.shape == (fine.n_basis, coarse.n_basis)

    coefficients = np.random.default_rng(3).standard_normal(coarse.n_basis)
    points = np.linspace(0.0, 1.0, 37)
    np.testing.assert_allclose(
        evaluate(fine, two_scale @ coefficients, points),
        evaluate(coarse, coefficients, points),
        atol=1e-13,
    )
    # refinement preserves the partition of unity
    np.testing.assert_allclose(two_scale @ np.ones(coarse.n_basis), np.ones(fine.n_basis))


def test_dyadic_refine_nonuniform():
    kv = KnotVector(np.array([0.0, 0.0, 0.1, 1.0, 1.0]), 1)
    with pytest.raises(UnsupportedError):
        dyadic_refine(SplineSpace(kv))


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_element_quadrature_integrates_basis(degree):
    space = SplineSpace.uniform(degree, 5)
    quad = element_quadrature(space)
    assert quad.values.shape == (5, degree + 1, degree + 1)
    integrals = quad.collocation().T @ quad.weights.ravel()
    knots = space.knots
    expected = (knots[degree + 1 :] - knots[: space.n_basis]) / (degree + 1)
    np.testing.assert_allclose(integrals, expected, atol=1e-14)
    np.testing.assert_almost_equal(np.sum(quad.weights), 1.0, decimal=14)


def test_identity_geometry():
    geometry = GeometryMap.identity(2)
    s = np.array([0.0, 0.3, 1.0])
    t = np.array([0.2, 0.9])
    points, jac = geometry.evaluate([s, t])
    assert points.shape == (3, 2, 2)
    np.testing.assert_almost_equal(points[..., 0], np.repeat(s[:, None], 2, axis=1), decimal=14)
    np.testing.assert_almost_equal(points[..., 1], np.repeat(t[None, :], 3, axis=0), decimal=14)
    np.testing.assert_almost_equal(jac, np.broadcast_to(np.eye(2), (3, 2, 2, 2)), decimal=14)

    with pytest.raises(ArgumentError):
        GeometryMap.identity(3)


def test_annulus_geometry():
    geometry = fit_annulus_geometry(3, 8)
    corners = np.array([0.0, 1.0])
    points, _ = geometry.evaluate([corners, corners])
    np.testing.assert_almost_equal(points[0, 0], [0.2, 0.0], decimal=12)
    np.testing.assert_almost_equal(points[1, 0], [1.0, 0.0], decimal=12)
    np.testing.assert_almost_equal(points[0, 1], [0.0, 0.2], decimal=12)
    np.testing.assert_almost_equal(points[1, 1], [0.0, 1.0], decimal=12)
    assert geometry.max_deviation is not None and geometry.max_deviation < 1e-4

    samples = np.linspace(0.0, 1.0, 15)
    _, jac = geometry.evaluate([samples, samples])
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    assert np.all(det > 0.0)

    with pytest.raises(ArgumentError):
        fit_annulus_geometry(1, 8)
