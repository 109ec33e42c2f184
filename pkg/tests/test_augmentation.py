import numpy as np
import pytest

import oracles
from pgmult.augmentation import GaussianPotential, evidence, sample_aux
from pgmult.gaussian import gaussian_posterior, sample_gaussian_posterior


def test_aux_means_at_zero_tilt():
    rng = np.random.default_rng(1)
    n = 100_000
    omega = sample_aux(np.tile([3, 2, 1], (n, 1)), np.zeros((n, 2)), rng)
    for k, b in enumerate((6, 3)):
        se = np.sqrt(oracles.pg_var(b, 0.0) / n)
        assert abs(omega[:, k].mean() - b / 4) < 4 * se


def test_scalar_posterior_example():
    pot = evidence(np.array([1, 0]), np.array([0.25]))
    mean, cov = gaussian_posterior(np.zeros(1), np.eye(1), pot)
    assert mean[0] == pytest.approx(0.4, abs=1e-14)
    assert cov[0, 0] == pytest.approx(0.8, abs=1e-14)


def test_two_coordinate_posterior_example():
    pot = evidence(np.array([3, 2, 1]), np.array([1.0, 1.0]))
    mean, cov = gaussian_posterior(np.zeros(2), np.eye(2), pot)
    assert np.allclose(mean, [0.0, 0.25], atol=1e-14)
    assert np.allclose(cov, 0.5 * np.eye(2), atol=1e-14)


def test_zero_residual_coordinates_are_untouched(rng):
    x = np.array([[3, 0, 0], [0, 0, 4], [2, 2, 0]])
    psi = rng.normal(size=(3, 2))
    omega = sample_aux(x, psi, rng)
    pot = evidence(x, omega)
    # N(x) = (3, 0), (4, 4), (4, 2)
    assert omega[0, 1] == 0 and pot.linear[0, 1] == 0
    assert np.all(omega[1:] > 0)
    # with no evidence the posterior is the prior exactly
    mu, cov = np.array([0.3, -1.0]), np.array([[1.0, 0.6], [0.6, 2.0]])
    none = GaussianPotential(np.zeros(2), np.zeros(2))
    m, S = gaussian_posterior(mu, cov, none)
    assert np.array_equal(m, mu) and np.array_equal(S, cov)
    # evidence on coordinate 1 only matches conditioning that coordinate alone
    one = GaussianPotential(np.array([pot.precision[0, 0], 0.0]), np.array([pot.linear[0, 0], 0.0]))
    m, S = gaussian_posterior(mu, cov, one)
    ref_m, ref_S = oracles.condition_dense(mu, cov, one.precision, one.linear)
    assert np.allclose(m, ref_m, atol=1e-12) and np.allclose(S, ref_S, atol=1e-12)


def test_potential_validation():
    with pytest.raises(ValueError):
        GaussianPotential(np.array([-1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        GaussianPotential(np.zeros(2), np.zeros(3))


def test_potential_indexing():
    pot = GaussianPotential(np.arange(6.0).reshape(3, 2), np.ones((3, 2)))
    assert pot[1].precision.tolist() == [2.0, 3.0]
    assert pot.column(1).precision.tolist() == [1.0, 3.0, 5.0]
    assert GaussianPotential.empty((2, 0)).precision.shape == (2, 0)


def test_sampled_posterior_moments():
    rng = np.random.default_rng(5)
    mu, cov = np.array([0.5, -0.5, 0.0]), np.array([[1.0, 0.3, 0.1], [0.3, 2.0, -0.4], [0.1, -0.4, 0.5]])
    pot = GaussianPotential(np.array([2.0, 0.0, 7.0]), np.array([1.0, 0.8, -2.0]))
    ref_m, ref_S = oracles.condition_dense(mu, cov, pot.precision, pot.linear)
    draws = np.array([sample_gaussian_posterior(mu, cov, pot, rng) for _ in range(10_000)])
    se = np.sqrt(np.diag(ref_S) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - ref_m) < 4 * se)
    assert np.allclose(np.cov(draws.T), ref_S, atol=0.06)
