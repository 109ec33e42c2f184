"""Stochastic variational inference for the stick-breaking correlated topic model.

Factors: q(beta_t) Dirichlet, q(mu, Sigma) normal-inverse-Wishart, and per
document q(psi_d) Gaussian, q(omega_d) Polya-gamma (only its mean is needed)
and q(z_dn) categorical.  E[log theta] has no closed form under the
stick-breaking map and is estimated by Monte Carlo from q(psi_d).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, logsumexp

from ..gaussian import NIW, cholesky_jitter
from ..polya_gamma import pg_mean
from ..rng import lane_rng, parallel_map, sweep_root
from ..stick_breaking import kappa, log_pi_sb, residual_counts
from .gibbs import CTMHyper

N_MC = 20
N_INNER = 5
_GH_X, _GH_W = np.polynomial.hermite.hermgauss(40)


@dataclass
class SVIState:
    lam: np.ndarray
    niw: NIW
    psi_mean: np.ndarray
    psi_cov: np.ndarray
    phi: list
    omega_mean: np.ndarray
    hyper: CTMHyper
    step: int = 0

    def point_estimate(self):
        """Plug-in globals (posterior means) usable wherever a Gibbs sample is."""
        return CTMPoint(
            self.lam / self.lam.sum(axis=1, keepdims=True),
            self.niw.mean0.copy(),
            self.niw.mean_sigma() if self.niw.dim else np.zeros((0, 0)),
        )


@dataclass
class CTMPoint:
    beta: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class SVIStats:
    """Minibatch sufficient statistics, already scaled to the corpus size."""

    word_topic: np.ndarray
    n: float
    psi_sum: np.ndarray
    psi_outer: np.ndarray


def svi_init(corpus, hyper, rng):
    T, V, D = hyper.n_topics, corpus.vocab_size, corpus.n_docs
    # random topics carrying the corpus' token mass; near-uniform topics sit at
    # a symmetric fixed point that full-batch updates never leave
    scale = max(corpus.n_tokens, 1) / (T * V)
    lam = hyper.alpha_beta + scale * rng.gamma(1.0, 1.0, size=(T, V))
    return SVIState(
        lam=lam,
        niw=hyper.niw,
        psi_mean=np.zeros((D, T - 1)),
        psi_cov=np.tile(np.eye(T - 1), (D, 1, 1)),
        phi=[np.full((d.size, T), 1.0 / T) for d in corpus.docs],
        omega_mean=np.zeros((D, T - 1)),
        hyper=hyper,
    )


def expected_pg_mean(m, v):
    """E[pg_mean(1, psi)] for psi ~ N(m, v) elementwise, by Gauss-Hermite quadrature."""
    m = np.asarray(m, dtype=float)
    s = np.sqrt(np.asarray(v, dtype=float))
    nodes = m[..., None] + np.sqrt(2.0) * s[..., None] * _GH_X
    return np.sum(_GH_W * pg_mean(1.0, nodes), axis=-1) / np.sqrt(np.pi)


def expected_omega(expected_counts, m, v):
    """E[omega_t] = E[N_t] * E[tanh(psi_t / 2) / (2 psi_t)] under the factorized q."""
    return residual_counts(expected_counts) * expected_pg_mean(m, v)


def local_update(tokens, psi_mean, psi_cov, elog_beta, e_prec, e_prec_mean, rng, n_inner=N_INNER, n_mc=N_MC):
    """Coordinate ascent on one document's (psi, omega, z) factors."""
    T = elog_beta.shape[0]
    word_term = elog_beta[:, tokens].T
    if T == 1:
        return psi_mean, psi_cov, np.ones((tokens.size, 1)), np.zeros(0)
    for _ in range(n_inner):
        chol = cholesky_jitter(psi_cov, "q(psi) covariance")
        draws = psi_mean + rng.standard_normal((n_mc, T - 1)) @ chol.T
        elog_theta = log_pi_sb(draws).mean(axis=0)
        log_phi = word_term + elog_theta
        phi = np.exp(log_phi - logsumexp(log_phi, axis=1, keepdims=True))
        ec = phi.sum(axis=0)
        omega = expected_omega(ec, psi_mean, np.diag(psi_cov))
        J = e_prec + np.diag(omega)
        L = cholesky_jitter(J, "q(psi) precision")
        psi_cov = np.linalg.inv(L).T @ np.linalg.inv(L)
        psi_mean = psi_cov @ (kappa(ec) + e_prec_mean)
    return psi_mean, psi_cov, phi, omega


def minibatch_stats(state, corpus, doc_ids, root, n_inner=N_INNER, n_mc=N_MC):
    """Local updates for ``doc_ids`` and their sufficient statistics scaled by D / |batch|.

    Each document's local update draws only from lane (root, lane id), so the
    statistics of a batch are the mean of its single-document statistics.
    """
    doc_ids = np.asarray(doc_ids, dtype=np.int64)
    if doc_ids.size == 0:
        raise ValueError("minibatch is empty")
    T, V = state.hyper.n_topics, corpus.vocab_size
    elog_beta = digamma(state.lam) - digamma(state.lam.sum(axis=1, keepdims=True))
    if T > 1:
        e_prec, e_prec_mean = state.niw.expected_precision(), state.niw.expected_precision_mean()
    else:
        e_prec, e_prec_mean = np.zeros((0, 0)), np.zeros(0)

    def one(d):
        return local_update(
            corpus.docs[d], state.psi_mean[d], state.psi_cov[d], elog_beta, e_prec, e_prec_mean,
            lane_rng(root, corpus.lanes[d]), n_inner, n_mc,
        )

    results = parallel_map(one, doc_ids)
    scale = corpus.n_docs / doc_ids.size
    word_topic = np.zeros((T, V))
    psi_sum = np.zeros(T - 1)
    psi_outer = np.zeros((T - 1, T - 1))
    for d, (m, S, phi, _) in zip(doc_ids, results):
        np.add.at(word_topic.T, corpus.docs[d], phi)
        psi_sum += m
        psi_outer += S + np.outer(m, m)
    stats = SVIStats(scale * word_topic, scale * doc_ids.size, scale * psi_sum, scale * psi_outer)
    return results, stats


def _niw_natural(niw):
    return niw.kappa0, niw.kappa0 * niw.mean0, niw.nu0, niw.psi0 + niw.kappa0 * np.outer(niw.mean0, niw.mean0)


def global_update(state, stats, step_size):
    """Convex combination (in natural parameters) of current globals and the batch optimum."""
    rho = step_size
    hyper = state.hyper
    lam_hat = hyper.alpha_beta + stats.word_topic
    lam = (1 - rho) * state.lam + rho * lam_hat
    niw = state.niw
    if hyper.n_topics > 1:
        p0 = _niw_natural(hyper.niw)
        target = (p0[0] + stats.n, p0[1] + stats.psi_sum, p0[2] + stats.n, p0[3] + stats.psi_outer)
        cur = _niw_natural(state.niw)
        k, km, nu, outer = [(1 - rho) * c + rho * t for c, t in zip(cur, target)]
        mean = km / k
        psi = outer - k * np.outer(mean, mean)
        niw = NIW(mean, k, nu, 0.5 * (psi + psi.T))
    return lam, niw


def ctm_svi_step(state, corpus, minibatch, step_size, rng, n_inner=N_INNER, n_mc=N_MC):
    """One SVI step on the documents in ``minibatch``; returns a new state."""
    if not 0 < step_size <= 1:
        raise ValueError("step_size must lie in (0, 1]")
    minibatch = np.asarray(minibatch, dtype=np.int64)
    results, stats = minibatch_stats(state, corpus, minibatch, sweep_root(rng), n_inner, n_mc)
    lam, niw = global_update(state, stats, step_size)
    psi_mean, psi_cov = state.psi_mean.copy(), state.psi_cov.copy()
    omega = state.omega_mean.copy()
    phi = list(state.phi)
    for d, (m, S, ph, om) in zip(minibatch, results):
        psi_mean[d], psi_cov[d], phi[d], omega[d] = m, S, ph, om
    return SVIState(lam, niw, psi_mean, psi_cov, phi, omega, state.hyper, state.step + 1)


def step_schedule(t, tau=1.0, kappa_=0.7):
    """Robbins-Monro step size (t + tau)^(-kappa)."""
    return float((t + tau) ** (-kappa_))
