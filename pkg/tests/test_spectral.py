"""Eigensolver and transfer-operator propagation."""

import numpy as np
import pytest
from scipy.sparse.linalg import expm_multiply

from chi_exit import (
    RegularGrid,
    build_sqrt_generator,
    eigensolve,
    flat_potential,
    propagate,
)

# frozen from the 50x50 benchmark build
LAMBDA_2 = 0.0025711021476007576
LAMBDA_3 = 0.008840173485250052


def test_benchmark_eigenvalues(eig3):
    assert abs(eig3.eigenvalues[0]) < 1e-12
    np.testing.assert_allclose(eig3.eigenvalues[1], LAMBDA_2, rtol=1e-9)
    np.testing.assert_allclose(eig3.eigenvalues[2], LAMBDA_3, rtol=1e-9)


def test_eigenvalues_ascending(eig3):
    assert np.all(np.diff(eig3.eigenvalues) >= 0)


def test_weighted_orthonormality(eig3):
    f = eig3.eigenvectors
    gram = f.T @ (eig3.weights[:, None] * f)
    np.testing.assert_allclose(gram, np.eye(eig3.count), rtol=0, atol=1e-10)


def test_sign_convention(eig3):
    for k in range(eig3.count):
        v = eig3.eigenvectors[:, k]
        assert v[np.argmax(np.abs(v))] > 0


def test_eigenvector_residuals(gen50, eig3):
    for k in range(eig3.count):
        v = eig3.eigenvectors[:, k]
        r = gen50.rates @ v - eig3.eigenvalues[k] * v
        assert np.max(np.abs(r)) < 1e-9


def test_first_eigenvector_constant(eig3):
    v = eig3.eigenvectors[:, 0]
    np.testing.assert_allclose(v, np.ones_like(v), rtol=0, atol=1e-8)


def test_sparse_path_matches_chain_formula():
    # 70x70 exceeds the dense cutoff; flat-potential eigenvalues are
    # 2(1 - cos(pi k / n)) per axis
    pot = flat_potential()
    grid = RegularGrid(70, 70, pot.domain)
    gen = build_sqrt_generator(pot, grid, 1.0)
    eig = eigensolve(gen, 2)
    expected = 2.0 * (1.0 - np.cos(np.pi / 70))
    assert abs(eig.eigenvalues[0]) < 1e-8
    np.testing.assert_allclose(eig.eigenvalues[1], expected, rtol=1e-8)


def test_propagate_semigroup(gen50):
    rng = np.random.default_rng(3)
    v = rng.uniform(0, 1, gen50.n)
    np.testing.assert_allclose(
        propagate(gen50, propagate(gen50, v, 5.0), 5.0),
        propagate(gen50, v, 10.0),
        rtol=0, atol=1e-10,
    )


def test_propagate_identity_at_zero(gen50):
    rng = np.random.default_rng(4)
    v = rng.uniform(0, 1, gen50.n)
    np.testing.assert_allclose(propagate(gen50, v, 0.0), v, rtol=0,
                               atol=1e-12)


def test_propagate_preserves_constants(gen50):
    ones = np.ones(gen50.n)
    np.testing.assert_allclose(propagate(gen50, ones, 50.0), ones, rtol=0,
                               atol=1e-10)


def test_propagate_preserves_positivity_and_bounds(gen50):
    rng = np.random.default_rng(5)
    v = rng.uniform(0, 1, gen50.n)
    out = propagate(gen50, v, 20.0)
    assert out.min() > -1e-12
    assert out.max() < 1.0 + 1e-12


def test_propagate_conserves_weighted_mass(gen50):
    rng = np.random.default_rng(6)
    v = rng.uniform(0, 1, gen50.n)
    before = float(gen50.weights @ v)
    after = float(gen50.weights @ propagate(gen50, v, 30.0))
    np.testing.assert_allclose(after, before, rtol=1e-10)


def test_propagate_matches_expm(bench):
    grid = RegularGrid(12, 12, bench.domain)
    gen = build_sqrt_generator(bench, grid, 1.0)
    rng = np.random.default_rng(7)
    v = rng.uniform(0, 1, gen.n)
    expected = expm_multiply(-2.5 * gen.rates.tocsc(), v)
    np.testing.assert_allclose(propagate(gen, v, 2.5), expected, rtol=0,
                               atol=1e-9)


def test_negative_tau_rejected(gen50):
    with pytest.raises(ValueError):
        propagate(gen50, np.ones(gen50.n), -1.0)


def test_eigensolve_k_bounds(gen_small):
    with pytest.raises(ValueError):
        eigensolve(gen_small, 0)
