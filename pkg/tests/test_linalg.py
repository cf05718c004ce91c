import numpy as np
import pytest
import scipy.sparse

from igamg.errors import ArgumentError, NotSPDError, SingularError
from igamg.linalg import (
    DenseFactor,
    is_symmetric,
    solve_direct,
    solve_spd,
    solve_upper_triangular,
    spectral_radius,
    spmv,
    thin_qr,
    triple_product,
)


def test_thin_qr_full_rank():
    mat = np.random.default_rng(0).standard_normal((10, 4))
    qr = thin_qr(mat)
    assert qr.rank == 4
    np.testing.assert_almost_equal(qr.q.T @ qr.q, np.eye(4), decimal=13)
    np.testing.assert_almost_equal(qr.q @ qr.r, mat, decimal=13)
    np.testing.assert_almost_equal(np.tril(qr.r, -1), np.zeros((4, 4)), decimal=15)


def test_thin_qr_dependent_column():
    rng = np.random.default_rng(1)
    mat = rng.standard_normal((8, 3))
    mat = np.column_stack([mat, mat[:, 0] - 2.0 * mat[:, 2]])
    qr = thin_qr(mat)
    assert qr.rank == 3
    np.testing.assert_almost_equal(qr.q[:, 3], np.zeros(8), decimal=15)
    assert abs(qr.r[3, 3]) < 1e-12 * abs(qr.r[0, 0])


def test_thin_qr_wide():
    mat = np.random.default_rng(2).standard_normal((2, 4))
    qr = thin_qr(mat)
    assert qr.rank == 2
    np.testing.assert_almost_equal(qr.q[:, :2] @ qr.r[:2, :], mat, decimal=13)


def test_thin_qr_zero():
    assert thin_qr(np.zeros((5, 2))).rank == 0
    with pytest.raises(ArgumentError):
        thin_qr(np.zeros(5))


def test_solve_upper_triangular():
    r = np.array([[2.0, 1.0], [0.0, 4.0]])
    np.testing.assert_almost_equal(solve_upper_triangular(r, np.array([4.0, 8.0])), [1.0, 2.0])
    with pytest.raises(SingularError):
        solve_upper_triangular(np.array([[1.0, 1.0], [0.0, 0.0]]), np.ones(2))


def test_dense_factor():
    rng = np.random.default_rng(3)
    root = rng.standard_normal((6, 6))
    spd = root @ root.T + 6.0 * np.eye(6)
    b = rng.standard_normal(6)
    factor = DenseFactor(spd)
    assert factor.symmetric
    np.testing.assert_allclose(spd @ factor.solve(b), b, atol=1e-12)

    general = spd + np.triu(np.ones((6, 6)), 1)
    factor = DenseFactor(scipy.sparse.csr_matrix(general))
    assert not factor.symmetric
    np.testing.assert_allclose(general @ factor.solve(b), b, atol=1e-12)

    with pytest.raises(NotSPDError):
        DenseFactor(np.diag([1.0, -1.0]))
    with pytest.raises(SingularError):
        DenseFactor(np.array([[1.0, 2.0], [3.0, 6.0]]))
    with pytest.raises(ArgumentError):
        factor.solve(np.ones(3))


def test_solve_spd_and_direct():
    mat = scipy.sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(5, 5), format="csr")
    b = np.arange(5.0)
    np.testing.assert_allclose(solve_spd(mat, b), solve_direct(mat, b), atol=1e-12)
    with pytest.raises(NotSPDError):
        solve_spd(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones(2))


def test_spmv_and_triple_product_shapes():
    mat = scipy.sparse.identity(3, format="csr")
    with pytest.raises(ArgumentError):
        spmv(mat, np.ones(4))
    prolongation = scipy.sparse.csr_matrix(np.ones((3, 2)))
    product = triple_product(prolongation.T, mat, prolongation)
    np.testing.assert_almost_equal(product.toarray(), 3.0 * np.ones((2, 2)))
    with pytest.raises(ArgumentError):
        triple_product(prolongation, mat, prolongation)


def test_is_symmetric():
    assert is_symmetric(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not is_symmetric(np.array([[1.0, 2.0], [2.1, 1.0]]))
    assert not is_symmetric(np.ones((2, 3)))


def test_spectral_radius():
    mat = np.diag([0.5, -0.2, 0.1])
    np.testing.assert_almost_equal(spectral_radius(mat), 0.5, decimal=8)
    assert spectral_radius(np.zeros((3, 3))) == 0.0


def _random_sparse(n, density, seed):
    return scipy.sparse.random(n, n, density=density, format="csr", random_state=seed)


def test_spmv_against_dense():
    mat = _random_sparse(20, 0.2, 5)
    rng = np.random.default_rng(5)
    x, y = rng.standard_normal((2, 20))
    np.testing.assert_allclose(spmv(mat, x), mat.toarray() @ x, atol=1e-13)
    np.testing.assert_allclose(
        spmv(mat, 2.5 * x - 0.5 * y), 2.5 * spmv(mat, x) - 0.5 * spmv(mat, y), atol=1e-12
    )


def test_spmv_tridiagonal_ones():
    mat = scipy.sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(6, 6), format="csr")
    np.testing.assert_array_equal(spmv(mat, np.ones(6)), [1.0, 0.0, 0.0, 0.0, 0.0, 1.0])


def test_triple_product_associativity():
    restriction, mat, prolongation = (_random_sparse(30, 0.1, seed) for seed in (6, 7, 8))
    product = triple_product(restriction, mat, prolongation).toarray()
    left = (restriction.toarray() @ mat.toarray()) @ prolongation.toarray()
    right = restriction.toarray() @ (mat.toarray() @ prolongation.toarray())
    np.testing.assert_allclose(product, left, atol=1e-12)
    np.testing.assert_allclose(product, right, atol=1e-12)


@pytest.mark.parametrize("condition", [1e2, 1e4, 1e6])
def test_cholesky_backward_error(condition):
    n = 40
    rng = np.random.default_rng(int(np.log10(condition)))
    basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    spd = basis @ np.diag(np.geomspace(1.0, 1.0 / condition, n)) @ basis.T
    spd = 0.5 * (spd + spd.T)
    b = rng.standard_normal(n)
    x = solve_spd(spd, b)
    backward = np.linalg.norm(b - spd @ x) / (np.linalg.norm(spd, 2) * np.linalg.norm(x))
    assert backward <= 10 * n * np.finfo(float).eps


def test_solve_spd_tridiagonal():
    mat = scipy.sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(7, 7), format="csr")
    expected = np.arange(1.0, 8.0)
    np.testing.assert_allclose(solve_spd(mat, mat @ expected), expected, atol=1e-10)
