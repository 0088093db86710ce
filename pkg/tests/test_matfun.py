#!/usr/bin/env python3
"""
Tests for geometry.matfun: eigendecomposition, eigenvalue-wise matrix
functions and their backward passes.
"""

import numpy as np
import pytest

from common.exceptions import InvalidInputError, SpdDomainError
from geometry.matfun import (
    ScalarFun,
    ensure_spd,
    ensure_symmetric,
    expm,
    invsqrtm,
    jacobi_eigh,
    logm,
    powm,
    spd_map,
    spd_map_backward,
    sqrtm,
    sym,
    sym_eig,
)


def random_symmetric(rng, dim, low=-1.0, high=1.0):
    return sym(rng.uniform(low, high, (dim, dim)))


def spd_with_spectrum(rng, values):
    q, _ = np.linalg.qr(rng.standard_normal((len(values), len(values))))
    return sym(q @ np.diag(values) @ q.T)


def fd_gradient(z, f, upstream, h=1e-5):
    """Central differences of <upstream, f(Z)> over the symmetric basis, as a symmetric matrix"""
    dim = z.shape[-1]
    grad = np.zeros_like(z)
    for i in range(dim):
        for j in range(i, dim):
            e = np.zeros_like(z)
            e[i, j] = e[j, i] = 1.0
            slope = (np.sum(upstream * spd_map(z + h * e, f)) - np.sum(upstream * spd_map(z - h * e, f))) / (2 * h)
            if i == j:
                grad[i, i] = slope
            else:
                grad[i, j] = grad[j, i] = slope / 2.0
    return grad


class TestSymEig:
    def test_reconstruction_and_orthonormality(self, rng):
        s = random_symmetric(rng, 5)
        eig = sym_eig(s)
        u = eig.eigenvectors
        assert np.linalg.norm(u.T @ u - np.eye(5)) < 1e-10
        assert np.linalg.norm(eig.reconstruct() - s) / np.linalg.norm(s) < 1e-9

    def test_eigenvalues_descending(self, rng):
        eigenvalues = sym_eig(random_symmetric(rng, 6)).eigenvalues
        assert np.all(np.diff(eigenvalues) <= 0)

    def test_matches_jacobi_oracle(self, rng):
        s = random_symmetric(rng, 5)
        oracle, _ = jacobi_eigh(s)
        np.testing.assert_allclose(sym_eig(s).eigenvalues, np.sort(oracle)[::-1], atol=1e-9)

    def test_jacobi_solver_reconstructs(self, rng):
        s = random_symmetric(rng, 4)
        eig = sym_eig(s, solver="jacobi")
        assert np.linalg.norm(eig.reconstruct() - s) / np.linalg.norm(s) < 1e-9
        np.testing.assert_allclose(eig.eigenvalues, sym_eig(s, solver="lapack").eigenvalues, atol=1e-10)

    def test_sign_convention(self, rng):
        u = sym_eig(random_symmetric(rng, 5)).eigenvectors
        for column in u.T:
            first = column[np.argmax(np.abs(column) > 1e-12)]
            assert first > 0

    def test_stack_matches_single(self, rng):
        stack = np.stack([random_symmetric(rng, 4) for _ in range(3)])
        eig = sym_eig(stack)
        for i in range(3):
            np.testing.assert_allclose(eig.eigenvalues[i], sym_eig(stack[i]).eigenvalues, atol=1e-12)

    def test_one_by_one(self):
        eig = sym_eig(np.array([[3.0]]))
        assert eig.eigenvalues.tolist() == [3.0]
        assert eig.eigenvectors.tolist() == [[1.0]]

    def test_asymmetric_input_rejected(self, rng):
        s = random_symmetric(rng, 3)
        s[0, 1] += 1e-6
        with pytest.raises(InvalidInputError):
            sym_eig(s)

    def test_non_square_rejected(self):
        with pytest.raises(InvalidInputError):
            ensure_symmetric(np.zeros((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            ensure_symmetric(np.array([[1.0, np.nan], [np.nan, 1.0]]))


class TestScalarFun:
    @pytest.mark.parametrize("f", [ScalarFun.log(), ScalarFun.exp(), ScalarFun.sqrt(), ScalarFun.inv_sqrt(),
                                   ScalarFun.power(0.7), ScalarFun.power(-1.0), ScalarFun.power(2.0)])
    def test_derivative_matches_finite_difference(self, f):
        lam = np.linspace(0.5, 3.0, 11)
        h = 1e-6
        numeric = (f.value(lam + h) - f.value(lam - h)) / (2 * h)
        np.testing.assert_allclose(f.derivative(lam), numeric, rtol=1e-6)

    def test_requires_spd(self):
        assert ScalarFun.log().requires_spd
        assert ScalarFun.power(0.5).requires_spd
        assert not ScalarFun.power(2.0).requires_spd
        assert not ScalarFun.exp().requires_spd

    def test_re_threshold_needs_positive_eps(self):
        with pytest.raises(InvalidInputError):
            ScalarFun.re_threshold(0.0)

    def test_re_threshold_derivative_is_step(self):
        f = ScalarFun.re_threshold(1.0)
        np.testing.assert_array_equal(f.derivative(np.array([0.5, 2.0])), [0.0, 1.0])


class TestSpdMap:
    def test_exp_log_round_trip(self, rng):
        s = random_symmetric(rng, 5)
        assert np.linalg.norm(logm(expm(s)) - s) < 1e-9

    def test_sqrt_then_square(self, spd):
        z = spd(5)
        assert np.linalg.norm(powm(sqrtm(z), 2.0) - z) / np.linalg.norm(z) < 1e-9

    def test_inv_sqrt_whitens(self, spd):
        z = spd(6)
        w = invsqrtm(z)
        assert np.linalg.norm(w @ z @ w - np.eye(6)) < 1e-8

    def test_log_of_non_spd_rejected(self):
        with pytest.raises(SpdDomainError):
            logm(np.diag([1.0, -1.0]))

    def test_exp_accepts_indefinite(self):
        np.testing.assert_allclose(expm(np.diag([1.0, -1.0])), np.diag([np.e, 1.0 / np.e]), atol=1e-12)

    def test_re_threshold_clamps_zero_eigenvalue(self, rng):
        z = spd_with_spectrum(rng, [0.0, 1.0, 2.0])
        out = spd_map(z, ScalarFun.re_threshold(1e-4))
        np.testing.assert_allclose(sym_eig(out).eigenvalues, [2.0, 1.0, 1e-4], atol=1e-12)

    def test_ensure_spd_rejects_singular(self, rng):
        with pytest.raises(SpdDomainError):
            ensure_spd(spd_with_spectrum(rng, [0.0, 1.0]))


class TestBackward:
    def test_log_matches_finite_differences_on_all_directions(self, rng, spd):
        z = spd(4)
        upstream = random_symmetric(rng, 4)
        analytic = spd_map_backward(z, ScalarFun.log(), upstream)
        numeric = fd_gradient(z, ScalarFun.log(), upstream)
        assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-5

    @pytest.mark.parametrize("dim", [2, 3, 5, 8])
    @pytest.mark.parametrize("f", [ScalarFun.log(), ScalarFun.exp(), ScalarFun.sqrt(), ScalarFun.inv_sqrt(),
                                   ScalarFun.power(0.6), ScalarFun.power(3.0)])
    def test_matches_finite_differences(self, rng, dim, f):
        z = spd_with_spectrum(rng, np.linspace(0.5, 2.5, dim))
        upstream = random_symmetric(rng, dim)
        analytic = spd_map_backward(z, f, upstream)
        numeric = fd_gradient(z, f, upstream)
        assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-5

    def test_re_threshold_away_from_kink(self, rng):
        z = spd_with_spectrum(rng, [0.3, 0.6, 2.0, 3.0])
        f = ScalarFun.re_threshold(1.0)
        upstream = random_symmetric(rng, 4)
        analytic = spd_map_backward(z, f, upstream)
        numeric = fd_gradient(z, f, upstream)
        assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-5

    def test_tied_eigenvalues_use_derivative(self, rng):
        upstream = random_symmetric(rng, 4)
        grad = spd_map_backward(2.0 * np.eye(4), ScalarFun.log(), upstream)
        np.testing.assert_allclose(grad, 0.5 * upstream, atol=1e-12)
