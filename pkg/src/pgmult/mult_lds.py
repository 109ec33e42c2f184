"""Stick-breaking multinomial linear dynamical system and a raw Gaussian LDS baseline.

The stick coordinates at time t are psi_t = C z_t + d.  Given the Polya-gamma
auxiliaries the whole state sequence is a linear-Gaussian chain, sampled
jointly by forward filtering, backward sampling.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .augmentation import GaussianPotential, evidence, sample_aux
from .errors import DataError
from .gaussian import MNIW, LDSParams, lds_ffbs, mvn_sample, sample_dynamics, sample_emission
from .stick_breaking import log_multinomial, log_multinomial_sb, pi_sb, pi_sb_inv

N_ROLLOUTS = 100


@dataclass
class SequenceData:
    obs: np.ndarray

    def __post_init__(self):
        self.obs = np.atleast_2d(np.asarray(self.obs))
        if np.any(self.obs < 0) or np.any(self.obs != np.rint(self.obs)):
            raise DataError("observations must be nonnegative integer counts")
        self.obs = self.obs.astype(np.int64)

    @classmethod
    def from_tokens(cls, tokens, n_categories):
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.size and (tokens.min() < 0 or tokens.max() >= n_categories):
            raise DataError("token id outside the vocabulary")
        obs = np.zeros((tokens.size, n_categories), np.int64)
        obs[np.arange(tokens.size), tokens] = 1
        return cls(obs)

    @property
    def totals(self):
        return self.obs.sum(axis=1)

    @property
    def n_categories(self):
        return self.obs.shape[1]

    def split(self, n_train):
        return SequenceData(self.obs[:n_train]), SequenceData(self.obs[n_train:])


@dataclass
class LDSPriors:
    """Conjugate priors: MNIW on (A, B), independent Gaussian rows on [C, d]."""

    dynamics: MNIW
    emission_mean: np.ndarray
    emission_precision: np.ndarray
    fixed: tuple = ()

    @classmethod
    def default(cls, D, K, bias_mean=None):
        bias_mean = np.zeros(K - 1) if bias_mean is None else np.asarray(bias_mean, dtype=float)
        mean = np.hstack([np.zeros((K - 1, D)), bias_mean[:, None]])
        return cls(MNIW.default(D), mean, np.eye(D + 1))


@dataclass
class MultLDSState:
    params: LDSParams
    states: np.ndarray
    omega: np.ndarray

    @property
    def psi(self):
        return self.states @ self.params.C.T + self.params.d


def sbmlds_generate(params, totals, rng):
    """Forward-simulate states and counts; ``totals`` gives N_t for every step."""
    totals = np.asarray(totals, dtype=np.int64)
    T = totals.size
    D = params.state_dim
    z = np.zeros((T, D))
    z[0] = mvn_sample(params.mu0, params.Sigma0, rng)
    for t in range(1, T):
        z[t] = mvn_sample(params.A @ z[t - 1], params.B, rng)
    pi = pi_sb(z @ params.C.T + params.d)
    obs = np.array([rng.multinomial(n, p / p.sum()) for n, p in zip(totals, pi)])
    return SequenceData(obs), z


def training_frequencies(obs, smoothing=0.0):
    pooled = np.asarray(obs, dtype=float).sum(axis=0) + smoothing
    return pooled / pooled.sum()


def sbmlds_init(data, D, rng, priors=None, scale=0.1):
    K = data.n_categories
    freq = training_frequencies(data.obs, smoothing=0.5)
    d = pi_sb_inv(freq)
    if priors is None:
        priors = LDSPriors.default(D, K, d)
    params = LDSParams(
        A=0.9 * np.eye(D), B=0.1 * np.eye(D), C=scale * rng.standard_normal((K - 1, D)),
        mu0=np.zeros(D), Sigma0=np.eye(D), d=d,
    )
    states = np.zeros((data.obs.shape[0], D))
    omega = sample_aux(data.obs, np.tile(d, (data.obs.shape[0], 1)), rng)
    return MultLDSState(params, states, omega.reshape(data.obs.shape[0], K - 1)), priors


def sbmlds_gibbs_sweep(state, data, priors, rng):
    """States by FFBS, then (A, B), then (C, d), then omega.

    Any of "dynamics" or "emission" in ``priors.fixed`` holds those parameters.
    """
    T, K = data.obs.shape
    params = state.params.copy()
    if K == 1:
        pot = GaussianPotential.empty((T, 0))
    else:
        pot = evidence(data.obs, state.omega)
    states = lds_ffbs(params, pot, rng)
    if "dynamics" not in priors.fixed and T >= 2:
        params.A, params.B = sample_dynamics(states, priors.dynamics, rng)
    if "emission" not in priors.fixed and K > 1:
        params.C, params.d = sample_emission(
            states, pot, rng, prior_mean=priors.emission_mean, prior_precision=priors.emission_precision
        )
    # one vectorized draw; the kernel is serial, so thread count cannot matter
    omega = sample_aux(data.obs, states @ params.C.T + params.d, rng).reshape(T, K - 1)
    return MultLDSState(params, states, omega)


def sbmlds_gibbs(data, D, sweeps, rng, burn=0, thin=1, priors=None, state=None, callback=None):
    if state is None:
        state, priors = sbmlds_init(data, D, rng, priors)
    elif priors is None:
        priors = LDSPriors.default(D, data.n_categories, state.params.d)
    kept = []
    for s in range(sweeps):
        state = sbmlds_gibbs_sweep(state, data, priors, rng)
        if callback is not None:
            callback(s, state)
        if s >= burn and (s - burn) % thin == 0:
            kept.append(state)
    return kept


def rollout(A, B, z_last, horizon, rng, n_rollouts=N_ROLLOUTS):
    """Sample future states z_{T+1..T+H}; returns an (n_rollouts, H, D) array."""
    D = z_last.shape[0]
    LB = np.linalg.cholesky(B) if D else np.zeros((0, 0))
    z = np.tile(z_last, (n_rollouts, 1))
    out = np.zeros((n_rollouts, horizon, D))
    for h in range(horizon):
        z = z @ A.T + rng.standard_normal((n_rollouts, D)) @ LB.T
        out[:, h] = z
    return out


def normalized_ll(log_pred, future, train_obs):
    """(log L_model - log L_baseline) / total future counts.

    ``log_pred`` holds log p(x_{T+h} | training data) per future step; the
    baseline is the multinomial at the training-mean frequencies.
    """
    future = np.atleast_2d(np.asarray(future))
    freq = training_frequencies(train_obs)
    if np.any((future.sum(axis=0) > 0) & (freq == 0)):
        raise DataError("a future category has zero training frequency; the baseline is undefined")
    base = log_multinomial(future, freq)
    n = future.sum()
    if n == 0:
        raise DataError("future observations contain no counts")
    return float((np.sum(log_pred) - np.sum(base)) / n)


def sbmlds_log_predictive(samples, future, rng, n_rollouts=N_ROLLOUTS):
    """log p(x_{T+h} | training data) for each future step h, by Monte Carlo.

    Averages the multinomial likelihood over posterior samples and, for each,
    ``n_rollouts`` simulated continuations from the sample's final state.
    """
    future = np.atleast_2d(np.asarray(future))
    H = future.shape[0]
    logs = []
    for state in samples:
        p = state.params
        z = rollout(p.A, p.B, state.states[-1], H, rng, n_rollouts)
        logs.append(log_multinomial_sb(future[None], z @ p.C.T + p.d))
    logs = np.concatenate(logs, axis=0)
    return logsumexp(logs, axis=0) - np.log(logs.shape[0])


def sbmlds_predictive_ll(samples, train, future, rng, n_rollouts=N_ROLLOUTS):
    """Normalized predictive log-likelihood of ``future`` (SequenceData or array)."""
    future = getattr(future, "obs", future)
    log_pred = sbmlds_log_predictive(samples, future, rng, n_rollouts)
    return normalized_ll(log_pred, future, getattr(train, "obs", train))


# ---------------------------------------------------------------------------
# Raw LDS baseline: x_t = C z_t + d + N(0, diag(R)) directly on the count vectors


@dataclass
class RawLDSState:
    params: LDSParams
    states: np.ndarray
    noise: np.ndarray = field(default=None)


def _raw_potential(obs, noise):
    prec = np.broadcast_to(1.0 / noise, obs.shape)
    return GaussianPotential(np.array(prec), obs * prec)


def raw_lds_gibbs(data, D, sweeps, rng, burn=0, thin=1, noise_prior=(1.0, 1.0), callback=None):
    """Gibbs for a Gaussian LDS with diagonal observation noise on raw counts."""
    obs = data.obs.astype(float)
    T, K = obs.shape
    a0, b0 = noise_prior
    params = LDSParams(
        A=0.9 * np.eye(D), B=0.1 * np.eye(D), C=0.1 * rng.standard_normal((K, D)),
        mu0=np.zeros(D), Sigma0=np.eye(D), d=obs.mean(axis=0),
    )
    noise = np.maximum(obs.var(axis=0), 1e-2)
    priors = LDSPriors(MNIW.default(D), np.hstack([np.zeros((K, D)), obs.mean(axis=0)[:, None]]), np.eye(D + 1))
    kept = []
    for s in range(sweeps):
        pot = _raw_potential(obs, noise)
        states = lds_ffbs(params, pot, rng)
        if T >= 2:
            params.A, params.B = sample_dynamics(states, priors.dynamics, rng)
        params.C, params.d = sample_emission(
            states, pot, rng, prior_mean=priors.emission_mean, prior_precision=priors.emission_precision
        )
        resid = obs - states @ params.C.T - params.d
        noise = 1.0 / rng.gamma(a0 + 0.5 * T, 1.0 / (b0 + 0.5 * np.sum(resid**2, axis=0)))
        if s >= burn and (s - burn) % thin == 0:
            kept.append(RawLDSState(params.copy(), states, noise.copy()))
            if callback is not None:
                callback(s, kept[-1])
    return kept


def raw_lds_forecast(samples, horizon, rng, n_rollouts=N_ROLLOUTS, floor=1e-6):
    """Mean count forecast mapped to the simplex: clamp at 0, floor at ``floor``, renormalize."""
    means = []
    for state in samples:
        p = state.params
        z = rollout(p.A, p.B, state.states[-1], horizon, rng, n_rollouts)
        means.append((z @ p.C.T + p.d).mean(axis=0))
    mean = np.mean(means, axis=0)
    pi = np.maximum(mean, 0.0) + floor
    return pi / pi.sum(axis=1, keepdims=True)


def raw_lds_predictive_ll(samples, train, future, rng, n_rollouts=N_ROLLOUTS, floor=1e-6):
    future = getattr(future, "obs", future)
    pi = raw_lds_forecast(samples, future.shape[0], rng, n_rollouts, floor)
    return normalized_ll(log_multinomial(future, pi), future, getattr(train, "obs", train))


def raw_lds_fit_predict(train, future, D, sweeps, rng, burn=None, thin=1, floor=1e-6, callback=None):
    """Fit the raw LDS on ``train`` and score ``future`` with the normalized multinomial LL."""
    burn = sweeps // 2 if burn is None else burn
    samples = raw_lds_gibbs(train, D, sweeps, rng, burn=burn, thin=thin, callback=callback)
    return raw_lds_predictive_ll(samples, train, future, rng, floor=floor)
