"""Eigendecomposition and SVD checks against independent closed-form oracles."""

import numpy as np
import numpy.testing as npt
import pytest

from conftest import random_complex, random_hermitian, random_unitary
from senselab import DimensionError, InputError, hermitian_eig, svd


def cubic_hermitian_eigenvalues(a):
    """Closed-form eigenvalues of a 3x3 Hermitian matrix.

    Trigonometric solution of the characteristic cubic; independent of
    any iterative solver.
    """
    q = np.trace(a).real / 3.0
    off = abs(a[0, 1]) ** 2 + abs(a[0, 2]) ** 2 + abs(a[1, 2]) ** 2
    p2 = sum((a[i, i].real - q) ** 2 for i in range(3)) + 2.0 * off
    if p2 == 0.0:
        return np.array([q, q, q])
    p = np.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = cofactor_det(b).real / 2.0
    phi = np.arccos(np.clip(r, -1.0, 1.0)) / 3.0
    eig1 = q + 2.0 * p * np.cos(phi)
    eig3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    eig2 = 3.0 * q - eig1 - eig3
    return np.sort(np.array([eig1, eig2, eig3]))


def cofactor_det(a):
    """Determinant by cofactor expansion, usable up to 4x4 here."""
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    total = 0.0 + 0.0j
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += (-1) ** j * a[0, j] * cofactor_det(minor)
    return total


class TestHermitianEig:
    def test_diagonal_two_by_two(self):
        dec = hermitian_eig(np.diag([3.0, 1.0]).astype(complex))
        npt.assert_allclose(dec.values, [1.0, 3.0], atol=1e-12)
        # permuted identity columns, phase fixed to real positive
        npt.assert_allclose(np.abs(dec.vectors), [[0, 1], [1, 0]], atol=1e-12)

    def test_identity_four(self):
        dec = hermitian_eig(np.eye(4, dtype=complex))
        npt.assert_allclose(dec.values, np.ones(4), atol=1e-12)

    def test_random_3x3_matches_cubic_roots(self, rng):
        for _ in range(25):
            a = random_hermitian(rng, 3)
            dec = hermitian_eig(a)
            expected = cubic_hermitian_eigenvalues(a)
            npt.assert_allclose(dec.values, expected, atol=1e-8 * max(1.0, np.abs(expected).max()))

    def test_values_ascending_and_vectors_orthonormal(self, rng):
        for n in (2, 3, 5, 8):
            a = random_hermitian(rng, n)
            dec = hermitian_eig(a)
            assert np.all(np.diff(dec.values) >= 0)
            gram = dec.vectors.conj().T @ dec.vectors
            assert np.linalg.norm(gram - np.eye(n)) <= 1e-10

    def test_eigen_equation_relative(self, rng):
        a = random_hermitian(rng, 6)
        dec = hermitian_eig(a)
        resid = a @ dec.vectors - dec.vectors * dec.values
        assert np.linalg.norm(resid) <= 1e-9 * np.linalg.norm(a)

    def test_trace_and_determinant_identities(self, rng):
        for n in (2, 3, 4):
            a = random_hermitian(rng, n)
            dec = hermitian_eig(a)
            npt.assert_allclose(np.sum(dec.values), np.trace(a).real,
                                rtol=1e-9, atol=1e-12)
            det = cofactor_det(a).real
            npt.assert_allclose(np.prod(dec.values), det,
                                rtol=1e-8, atol=1e-10)

    def test_symmetrizes_small_asymmetry(self, rng):
        a = random_hermitian(rng, 4)
        skew = a + 1e-12 * random_complex(rng, 4, 4)
        dec = hermitian_eig(skew)
        npt.assert_allclose(dec.values, hermitian_eig(a).values, atol=1e-10)

    def test_deterministic_with_phase_convention(self, rng):
        a = random_hermitian(rng, 5)
        d1 = hermitian_eig(a)
        d2 = hermitian_eig(a)
        assert np.array_equal(d1.values, d2.values)
        assert np.array_equal(d1.vectors, d2.vectors)
        for col in d1.vectors.T:
            top = col[np.argmax(np.abs(col))]
            assert abs(top.imag) <= 1e-12 * abs(top)
            assert top.real > 0

    def test_reconstruct(self, rng):
        a = random_hermitian(rng, 5)
        dec = hermitian_eig(a)
        npt.assert_allclose(dec.reconstruct(), a, atol=1e-10 * np.linalg.norm(a))

    def test_errors(self):
        with pytest.raises(DimensionError):
            hermitian_eig(np.ones((2, 3), dtype=complex))
        with pytest.raises(DimensionError):
            hermitian_eig(np.eye(65, dtype=complex))
        with pytest.raises(InputError):
            hermitian_eig(np.array([[np.nan, 0], [0, 1]], dtype=complex))


class TestSvd:
    def test_identity(self):
        dec = svd(np.eye(2, dtype=complex))
        npt.assert_allclose(dec.sigma, [1.0, 1.0], atol=1e-12)
        npt.assert_allclose(dec.u, np.eye(2), atol=1e-12)
        npt.assert_allclose(dec.v, np.eye(2), atol=1e-12)

    def test_rank_one_outer_product(self, rng):
        a_vec = random_complex(rng, 4)
        b_vec = random_complex(rng, 3)
        dec = svd(np.outer(a_vec, b_vec.conj()))
        expected = np.linalg.norm(a_vec) * np.linalg.norm(b_vec)
        npt.assert_allclose(dec.sigma[0], expected, rtol=1e-10)
        assert np.all(dec.sigma[1:] <= 1e-9 * dec.sigma[0])

    def test_sigma_squared_matches_gram_eigenvalues(self, rng):
        for _ in range(25):
            a = random_complex(rng, 3, 2)
            dec = svd(a)
            gram = hermitian_eig(a.conj().T @ a)
            npt.assert_allclose(np.sort(dec.sigma**2), gram.values,
                                atol=1e-8 * max(1.0, gram.values.max()))

    def test_thin_shapes_and_descending(self, rng):
        for m, n in ((2, 5), (5, 2), (4, 4), (1, 3), (3, 1)):
            a = random_complex(rng, m, n)
            dec = svd(a)
            r = min(m, n)
            assert dec.u.shape == (m, r)
            assert dec.v.shape == (n, r)
            assert dec.sigma.shape == (r,)
            assert np.all(np.diff(dec.sigma) <= 0)
            assert np.all(dec.sigma >= 0)

    def test_reconstruction_and_equation_residuals(self, rng):
        for m, n in ((3, 2), (2, 3), (6, 6), (8, 3)):
            a = random_complex(rng, m, n)
            dec = svd(a)
            norm = np.linalg.norm(a)
            assert np.linalg.norm(dec.reconstruct() - a) <= 1e-9 * norm
            resid = a @ dec.v - dec.u * dec.sigma
            assert np.linalg.norm(resid) <= 1e-9 * norm

    def test_unitarity_of_factors(self, rng):
        a = random_complex(rng, 5, 4)
        dec = svd(a)
        for q in (dec.u, dec.v):
            gram = q.conj().T @ q
            assert np.linalg.norm(gram - np.eye(q.shape[1])) <= 1e-10

    def test_singular_values_of_unitary_are_one(self, rng):
        q = random_unitary(rng, 5)
        dec = svd(q)
        npt.assert_allclose(dec.sigma, np.ones(5), atol=1e-10)

    def test_zero_matrix(self):
        dec = svd(np.zeros((3, 2), dtype=complex))
        npt.assert_allclose(dec.sigma, np.zeros(2), atol=1e-15)
        assert np.linalg.norm(dec.reconstruct()) <= 1e-12

    def test_phase_convention_deterministic(self, rng):
        # each V column's largest-magnitude entry is real positive; the
        # matching U column inherits the joint phase (A = U S V^H pins
        # the pair phase, so only one factor can be normalized)
        a = random_complex(rng, 4, 3)
        dec = svd(a)
        for col in dec.v.T:
            top = col[np.argmax(np.abs(col))]
            assert abs(top.imag) <= 1e-12 * abs(top)
            assert top.real > 0
        again = svd(a)
        assert np.array_equal(dec.u, again.u)
        assert np.array_equal(dec.sigma, again.sigma)
        assert np.array_equal(dec.v, again.v)

    def test_errors(self):
        with pytest.raises(InputError):
            svd(np.array([[1.0, np.inf]], dtype=complex))
        with pytest.raises(DimensionError):
            svd(np.zeros((0, 2), dtype=complex))
