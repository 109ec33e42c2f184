"""Multinomial Gaussian-process regression with stick-breaking likelihoods.

Each stick coordinate k has its own latent function psi_{:,k} ~ GP(mu_k, C)
over the inputs, sharing the kernel.  Given the Polya-gamma auxiliaries the
coordinates are conditionally independent Gaussians, so the sweep redraws
every psi_{:,k} jointly and then all omega.
"""

from dataclasses import dataclass

import numpy as np

from .augmentation import GaussianPotential, evidence, sample_aux
from .errors import DataError, ParameterError
from .gaussian import GPSpec, gp_predict_marginal, sample_gaussian_posterior
from .rng import lane_rng, parallel_map, sweep_root
from .stick_breaking import pi_sb, pi_sb_inv

N_PSI_DRAWS = 200


@dataclass
class GPCountData:
    inputs: np.ndarray
    counts: np.ndarray
    categories: list = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.counts = np.atleast_2d(np.asarray(self.counts))
        if self.inputs.shape[0] != self.counts.shape[0]:
            raise DataError("inputs and counts must have the same number of rows")
        if np.any(self.counts < 0) or np.any(self.counts != np.rint(self.counts)):
            raise DataError("counts must be nonnegative integers")
        self.counts = self.counts.astype(np.int64)

    @property
    def totals(self):
        return self.counts.sum(axis=1)

    @property
    def n_categories(self):
        return self.counts.shape[1]


@dataclass
class MultGPState:
    psi: np.ndarray
    omega: np.ndarray
    spec: GPSpec

    @property
    def pi(self):
        return pi_sb(self.psi)


def empirical_mean(counts, smoothing=0.5):
    """mu_k = pi_sb_inv of the pooled, smoothed category frequencies."""
    pooled = np.asarray(counts, dtype=float).reshape(-1, np.shape(counts)[-1]).sum(axis=0) + smoothing
    return pi_sb_inv(pooled / pooled.sum())


def multgp_init(data, kernel, rng, mean=None):
    mean = empirical_mean(data.counts) if mean is None else np.asarray(mean, dtype=float)
    spec = GPSpec(kernel, data.inputs, mean)
    M, K = data.counts.shape
    psi = np.tile(mean, (M, 1))
    omega = sample_aux(data.counts, psi, rng).reshape(M, K - 1)
    return MultGPState(psi, omega, spec)


def multgp_gibbs_sweep(state, data, rng, order=None):
    """psi_{:,k} | omega, x for every k (in ``order``), then omega | psi, x.

    Output k always draws from lane k and input m's auxiliaries from lane
    K - 1 + m, so the update order does not change the result.
    """
    M, K = data.counts.shape
    if K == 1:
        return state
    spec = state.spec
    root = sweep_root(rng)
    pot = evidence(data.counts, state.omega)
    C, chol = spec.gram, spec.gram_chol
    order = range(K - 1) if order is None else order

    def update(k):
        mu = np.full(M, spec.mean[k])
        return k, sample_gaussian_posterior(mu, C, pot.column(k), lane_rng(root, k), cov_chol=chol)

    psi = np.empty_like(state.psi)
    for k, col in parallel_map(update, order):
        psi[:, k] = col

    def aux(m):
        return sample_aux(data.counts[m], psi[m], lane_rng(root, K - 1 + m))

    omega = np.array(parallel_map(aux, range(M))).reshape(M, K - 1)
    return MultGPState(psi, omega, spec)


def multgp_gibbs(data, kernel, sweeps, rng, burn=0, thin=1, state=None, callback=None):
    state = multgp_init(data, kernel, rng) if state is None else state
    kept = []
    for s in range(sweeps):
        state = multgp_gibbs_sweep(state, data, rng)
        if callback is not None:
            callback(s, state)
        if s >= burn and (s - burn) % thin == 0:
            kept.append(state)
    return kept


def predictive_moments(state, data, test_inputs):
    """Per-coordinate Gaussian p(psi_test | x, omega) with the training latents integrated out.

    Returns (means, variances), both of shape (n_test, K-1).
    """
    pot = evidence(data.counts, state.omega)
    cols = [gp_predict_marginal(state.spec, pot.column(k), k, test_inputs) for k in range(data.n_categories - 1)]
    means = np.stack([c[0] for c in cols], axis=-1)
    variances = np.maximum(np.stack([c[1] for c in cols], axis=-1), 0.0)
    return means, variances


def multgp_predict(samples, data, test_inputs, rng, n_psi=N_PSI_DRAWS):
    """Predictive mean simplex at each test input, mixing the Gaussian predictive over omega samples.

    For each retained sample, ``n_psi`` draws of psi_test are pushed through
    pi_sb; the result averages over draws and samples.
    """
    if not samples:
        raise ValueError("need at least one retained sample")
    Xs = np.atleast_2d(np.asarray(test_inputs, dtype=float))
    K = data.n_categories
    total = np.zeros((Xs.shape[0], K))
    for state in samples:
        means, variances = predictive_moments(state, data, Xs)
        eps = rng.standard_normal((n_psi,) + means.shape)
        total += pi_sb(means + np.sqrt(variances) * eps).mean(axis=0)
    return total / len(samples)


def rank_sets(p, k):
    """Indices of the k largest and k smallest entries; ties go to the lower index."""
    p = np.asarray(p, dtype=float)
    top = np.argsort(-p, kind="stable")[:k]
    bottom = np.argsort(p, kind="stable")[:k]
    return top, bottom


def topk_eval(predicted, realized, k=10):
    """(hits in top-k, hits in bottom-k) between a predicted simplex and realized counts."""
    predicted = np.asarray(predicted, dtype=float)
    realized = np.asarray(realized, dtype=float)
    if predicted.shape[-1] < 2 * k:
        raise ParameterError(f"need at least {2 * k} categories for k={k}")
    ptop, pbot = rank_sets(predicted, k)
    rtop, rbot = rank_sets(realized, k)
    return len(np.intersect1d(ptop, rtop)), len(np.intersect1d(pbot, rbot))


def downsample(counts, n, rng):
    """Thin each row to ``n`` observations without replacement (rows with fewer are kept)."""
    counts = np.atleast_2d(np.asarray(counts, dtype=np.int64))
    out = counts.copy()
    for m, row in enumerate(counts):
        if row.sum() > n:
            out[m] = rng.multivariate_hypergeometric(row, n)
    return out


def raw_gp_predict(data, kernel, test_inputs, noise_var=1.0, smoothing=0.5):
    """Baseline: a Gaussian GP on pi_sb_inv of smoothed empirical frequencies.

    Each coordinate is fit with Gaussian noise of variance ``noise_var``; the
    predictive mean is mapped back through pi_sb.
    """
    freq = (data.counts + smoothing) / (data.totals[:, None] + smoothing * data.n_categories)
    target = pi_sb_inv(freq)
    mean = empirical_mean(data.counts, smoothing)
    spec = GPSpec(kernel, data.inputs, mean)
    prec = np.full(target.shape, 1.0 / noise_var)
    pot = GaussianPotential(prec, target * prec)
    cols = [gp_predict_marginal(spec, pot.column(k), k, test_inputs)[0] for k in range(target.shape[1])]
    return pi_sb(np.stack(cols, axis=-1))


def static_predict(data, test_inputs):
    """Baseline: carry forward the empirical frequencies of the nearest training input.

    Among equally near inputs the last one in the data wins.
    """
    Xs = np.atleast_2d(np.asarray(test_inputs, dtype=float))
    freq = data.counts / np.maximum(data.totals[:, None], 1)
    dist = np.sum((Xs[:, None, :] - data.inputs[None, :, :]) ** 2, axis=-1)
    nearest = dist.shape[1] - 1 - np.argmin(dist[:, ::-1], axis=1)
    return freq[nearest]
