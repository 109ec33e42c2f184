import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

import oracles
from pgmult.errors import BoundaryError, ParameterError
from pgmult.stick_breaking import (
    forward_log_jacobian,
    frequency_order,
    inverse_log_jacobian,
    kappa,
    log_density_pi_given_gaussian,
    log_density_psi_given_dirichlet,
    log_multinomial,
    log_multinomial_sb,
    moment_match_dirichlet,
    pi_sb,
    pi_sb_inv,
    residual_counts,
    sample_psi_from_dirichlet,
)

# frozen from the oracles module
LOG_MULT_211 = -1.6739764335716716
LOG_MULT_003 = -4.1588830833596715
LOG_DENS_K2_CENTER = 0.4673558279152179
LOG_DIR_K2_ZERO = -1.3862943611198906

psi_vectors = arrays(np.float64, st.integers(1, 6), elements=st.floats(-10, 10))


def test_frozen_oracle_values():
    assert math.log(oracles.multinomial_pmf((2, 1, 1), (0.5, 0.25, 0.25))) == pytest.approx(LOG_MULT_211, abs=1e-14)
    assert math.log(oracles.multinomial_pmf((0, 0, 3), (0.5, 0.25, 0.25))) == pytest.approx(LOG_MULT_003, abs=1e-14)
    assert stats.norm.logpdf(0) + math.log(4) == pytest.approx(LOG_DENS_K2_CENTER, abs=1e-14)
    assert oracles.dirichlet_psi_logpdf(np.zeros(1), [1, 1]) == pytest.approx(LOG_DIR_K2_ZERO, abs=1e-14)


def test_map_examples():
    assert np.allclose(pi_sb([math.log(0.25), 0.0]), [0.2, 0.4, 0.4], atol=1e-15)
    assert np.allclose(pi_sb_inv([0.2, 0.4, 0.4]), [math.log(0.25), 0.0], atol=1e-12)
    assert np.allclose(pi_sb(np.zeros(2)), [0.5, 0.25, 0.25])


def test_residual_counts_and_kappa_examples():
    assert residual_counts([3, 2, 1]).tolist() == [6, 3]
    assert residual_counts([0, 0, 5]).tolist() == [5, 5]
    assert kappa([3, 2, 1]).tolist() == [0.0, 0.5]
    assert kappa([1, 0]).tolist() == [0.5]


def test_log_multinomial_examples():
    assert log_multinomial_sb([2, 1, 1], np.zeros(2)) == pytest.approx(LOG_MULT_211, abs=1e-12)
    assert log_multinomial_sb([0, 0, 3], np.zeros(2)) == pytest.approx(LOG_MULT_003, abs=1e-12)
    assert log_multinomial_sb([0, 0, 3], np.zeros(2)) == pytest.approx(3 * math.log(0.25), abs=1e-12)


def test_density_examples():
    assert log_density_pi_given_gaussian([0.5, 0.5], [0.0], [[1.0]]) == pytest.approx(LOG_DENS_K2_CENTER, abs=1e-12)
    assert log_density_psi_given_dirichlet([0.0], [1.0, 1.0]) == pytest.approx(LOG_DIR_K2_ZERO, abs=1e-12)


@given(psi=psi_vectors)
def test_matches_loop_oracle(psi):
    assert np.allclose(pi_sb(psi), oracles.stick_break(psi), rtol=1e-12, atol=1e-300)
    assert np.allclose(residual_counts(np.arange(psi.size + 1)), oracles.residual(list(range(psi.size + 1))))


@given(psi=psi_vectors)
def test_round_trip(psi):
    assert np.max(np.abs(pi_sb_inv(pi_sb(psi)) - psi)) < 1e-10


@given(psi=arrays(np.float64, st.integers(1, 8), elements=st.floats(-500, 500)))
def test_simplex_validity_including_saturation(psi):
    pi = pi_sb(psi)
    assert np.all(pi >= 0)
    assert abs(pi.sum() - 1) < 1e-12


def test_saturated_inputs():
    pi = pi_sb(np.array([500.0, -500.0, 500.0]))
    assert np.all(np.isfinite(pi)) and abs(pi.sum() - 1) < 1e-12
    assert pi[0] == pytest.approx(1.0)
    assert np.all(np.isfinite(pi_sb(np.array([1e308, -1e308]))))


@pytest.mark.parametrize("K", [2, 3, 4])
def test_decomposition_exact_by_enumeration(K):
    rng = np.random.default_rng(K)
    for _ in range(3):
        psi = rng.normal(0, 2, K - 1)
        pi = oracles.stick_break(psi)
        for N in range(7):
            xs = list(oracles.compositions(N, K))
            sb = np.exp(log_multinomial_sb(np.array(xs), psi))
            brute = np.array([oracles.multinomial_pmf(x, pi) for x in xs])
            assert np.max(np.abs(sb / brute - 1)) < 1e-10
            assert abs(sb.sum() - 1) < 1e-9


def test_batched_log_multinomial_broadcasts():
    x = np.array([[1, 2, 0], [0, 0, 3]])
    psi = np.array([[0.1, -0.3], [2.0, 1.0]])
    out = log_multinomial_sb(x, psi)
    assert out.shape == (2,)
    assert out[1] == pytest.approx(log_multinomial_sb(x[1], psi[1]))
    assert out[0] == pytest.approx(log_multinomial(x[0], pi_sb(psi[0])), abs=1e-12)


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(20):
        K = int(rng.integers(2, 6))
        psi = rng.normal(0, 1.5, K - 1)
        fd = oracles.fd_jacobian(lambda p: pi_sb(p)[:-1], psi)
        ref = math.log(abs(np.linalg.det(fd)))
        assert abs(forward_log_jacobian(psi) - ref) < 1e-5 * abs(ref)
        pi = pi_sb(psi)
        fd_inv = oracles.fd_jacobian(lambda p: pi_sb_inv(np.append(p, 1 - p.sum())), pi[:-1], h=1e-7)
        ref_inv = math.log(abs(np.linalg.det(fd_inv)))
        assert abs(inverse_log_jacobian(pi) - ref_inv) < 1e-5 * abs(ref_inv)


@given(psi=psi_vectors)
def test_jacobian_identity(psi):
    assert abs(forward_log_jacobian(psi) + inverse_log_jacobian(pi_sb(psi))) < 1e-8


def test_dirichlet_density_against_change_of_variables():
    rng = np.random.default_rng(8)
    for alpha in ([1.0, 1.0, 1.0], [0.5, 2.0, 3.0], [4.0, 1.0, 0.3, 2.0]):
        for _ in range(50):
            psi = rng.normal(0, 2, len(alpha) - 1)
            ref = oracles.dirichlet_psi_logpdf(psi, alpha)
            assert abs(log_density_psi_given_dirichlet(psi, alpha) - ref) < 1e-8


def test_dirichlet_psi_histogram():
    # psi_1 under Dir(1,1,1) against its density by a chi-square test
    rng = np.random.default_rng(9)
    pi = rng.dirichlet([1.0, 1.0, 1.0], size=40_000)
    psi = pi_sb_inv(pi)
    edges = np.linspace(-4, 3, 15)
    observed, _ = np.histogram(psi[:, 0], bins=edges)
    # marginal of psi_1 is a transformed Beta(1, 2)
    cdf = stats.beta.cdf(1 / (1 + np.exp(-edges)), 1, 2)
    expected = np.diff(cdf) * psi.shape[0]
    chi2 = np.sum((observed - expected) ** 2 / expected)
    assert stats.chi2.sf(chi2, len(expected) - 1) > 1e-3


def test_direct_dirichlet_psi_sampler():
    rng = np.random.default_rng(10)
    psi = sample_psi_from_dirichlet(np.array([2.0, 1.0, 3.0]), 50_000, rng)
    assert np.allclose(pi_sb(psi).mean(axis=0), [2 / 6, 1 / 6, 3 / 6], atol=0.01)


def test_moment_matched_gaussian_pushforward():
    rng = np.random.default_rng(11)
    alpha = np.array([1.0, 2.0, 3.0, 4.0])
    mean, var = moment_match_dirichlet(alpha, rng)
    draws = pi_sb(mean + np.sqrt(var) * rng.standard_normal((50_000, 3)))
    assert np.allclose(draws.mean(axis=0), alpha / alpha.sum(), atol=0.02)


def test_k3_pushforward_density_integrates_to_one():
    from scipy import integrate

    mu, sigma = np.array([0.3, -0.2]), np.array([[1.0, 0.4], [0.4, 0.7]])

    def dens(p2, p1):
        return math.exp(log_density_pi_given_gaussian([p1, p2, 1 - p1 - p2], mu, sigma))

    total, _ = integrate.dblquad(dens, 0, 1, 0, lambda p1: 1 - p1, epsabs=1e-9)
    assert abs(total - 1) < 1e-3


def test_boundary_and_parameter_errors():
    with pytest.raises(BoundaryError):
        pi_sb_inv([0.0, 0.5, 0.5])
    with pytest.raises(BoundaryError):
        log_density_pi_given_gaussian([1.0, 0.0], [0.0], [[1.0]])
    with pytest.raises(ParameterError):
        log_density_psi_given_dirichlet([0.0], [0.0, 1.0])
    with pytest.raises(np.linalg.LinAlgError):
        log_density_pi_given_gaussian([0.5, 0.5], [0.0], [[-1.0]])


@settings(max_examples=30)
@given(counts=arrays(np.int64, (4, 5), elements=st.integers(0, 50)))
def test_frequency_order_is_descending_and_stable(counts):
    order = frequency_order(counts)
    totals = counts.sum(axis=0)[order]
    assert np.all(np.diff(totals) <= 0)
    assert sorted(order.tolist()) == list(range(5))
