"""Stick-breaking correlated topic model: generative sampler and Gibbs sweep."""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..augmentation import sample_aux
from ..errors import LinAlgError
from ..gaussian import NIW, cholesky_jitter, mvn_sample
from ..rng import lane_rng, parallel_map, sweep_root
from ..stick_breaking import pi_sb, pi_sb_inv
from .corpus import Corpus
from .kernels import ctm_local_kernel
from .lda import lda_assignments


@dataclass
class CTMHyper:
    n_topics: int
    alpha_beta: float = 0.1
    niw: NIW = None

    def __post_init__(self):
        if self.n_topics < 1:
            raise ValueError("need at least one topic")
        if not self.alpha_beta > 0:
            raise ValueError("alpha_beta must be positive")
        if self.niw is None:
            self.niw = NIW.default(self.n_topics - 1)


@dataclass
class CTMState:
    beta: np.ndarray
    psi: np.ndarray
    omega: np.ndarray
    z: list
    mu: np.ndarray
    sigma: np.ndarray
    hyper: CTMHyper
    counts: np.ndarray = field(default=None)
    topic_word: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = topic_counts(self.z, self.hyper.n_topics)

    @property
    def theta(self):
        return pi_sb(self.psi)

    @property
    def predictive_beta(self):
        """E[beta | z, w], the topic estimate used for prediction."""
        if self.topic_word is None:
            return self.beta
        a = self.hyper.alpha_beta + self.topic_word
        return a / a.sum(axis=1, keepdims=True)


def topic_counts(z, n_topics):
    return np.array([np.bincount(zd, minlength=n_topics) for zd in z], dtype=np.int64).reshape(len(z), n_topics)


def sample_categorical(p, rng):
    """One draw per row of the unnormalized probability matrix ``p``."""
    cum = np.cumsum(p, axis=-1)
    u = rng.random(p.shape[:-1]) * cum[..., -1]
    idx = np.sum(cum < u[..., None], axis=-1)
    return np.minimum(idx, p.shape[-1] - 1)


def sample_dirichlet_rows(alpha, rng):
    g = rng.standard_gamma(alpha)
    return g / g.sum(axis=-1, keepdims=True)


def ctm_generate(n_topics, vocab_size, n_docs, doc_len, rng, mu=None, sigma=None, alpha_beta=0.1, beta=None):
    """Synthetic corpus plus the ground-truth latent state that produced it."""
    T, V = n_topics, vocab_size
    hyper = CTMHyper(T, alpha_beta)
    mu = np.zeros(T - 1) if mu is None else np.asarray(mu, dtype=float)
    sigma = np.eye(T - 1) if sigma is None else np.asarray(sigma, dtype=float)
    if beta is None:
        beta = sample_dirichlet_rows(np.full((T, V), alpha_beta), rng)
    lengths = np.broadcast_to(np.asarray(doc_len, dtype=np.int64), (n_docs,))
    psi = mvn_sample(mu, sigma, rng, size=n_docs) if T > 1 else np.zeros((n_docs, 0))
    theta = pi_sb(psi)
    docs, z = [], []
    for d in range(n_docs):
        zd = rng.choice(T, size=lengths[d], p=theta[d])
        wd = sample_categorical(beta[zd], rng) if lengths[d] else np.zeros(0, np.int64)
        docs.append(wd.astype(np.int64))
        z.append(zd.astype(np.int64))
    corpus = Corpus(docs, V)
    counts = topic_counts(z, T)
    omega = sample_aux(counts, psi, rng)
    state = CTMState(beta, psi, np.atleast_2d(omega).reshape(n_docs, T - 1), z, mu, sigma, hyper, counts)
    return corpus, state


def ctm_init(corpus, hyper, rng, warm_sweeps=0):
    """Start a chain from a prior draw of the globals and uniform topic mixtures.

    With ``warm_sweeps > 0`` the topic assignments instead come from that many
    collapsed LDA sweeps, and beta, psi and (mu, Sigma) are drawn given them.
    This only changes where the chain starts.
    """
    T, D = hyper.n_topics, corpus.n_docs
    if warm_sweeps > 0 and T > 1:
        return _warm_start(corpus, hyper, rng, warm_sweeps)
    beta = sample_dirichlet_rows(np.full((T, corpus.vocab_size), hyper.alpha_beta), rng)
    mu, sigma = np.zeros(T - 1), np.eye(T - 1)
    psi = np.zeros((D, T - 1))
    z = [rng.integers(0, T, size=d.size) for d in corpus.docs]
    counts = topic_counts(z, T)
    omega = sample_aux(counts, psi, rng).reshape(D, T - 1)
    return CTMState(beta, psi, omega, z, mu, sigma, hyper, counts)


def _warm_start(corpus, hyper, rng, sweeps):
    T, V = hyper.n_topics, corpus.vocab_size
    flat_z = lda_assignments(corpus, T, 1.0 / T, hyper.alpha_beta, sweeps, rng)
    z = np.split(flat_z, np.cumsum(corpus.lengths)[:-1])
    counts = topic_counts(z, T)
    tokens, _ = corpus.flat()
    n_tw = np.bincount(flat_z * V + tokens, minlength=T * V).reshape(T, V)
    beta = sample_dirichlet_rows(hyper.alpha_beta + n_tw, rng)
    psi = pi_sb_inv((counts + 0.5) / (counts.sum(axis=1, keepdims=True) + 0.5 * T))
    mu, sigma = hyper.niw.posterior(psi).sample(rng)
    omega = sample_aux(counts, psi, rng).reshape(corpus.n_docs, T - 1)
    return CTMState(beta, psi, omega, z, mu, sigma, hyper, counts)


def information_prior(mu, sigma):
    """(Sigma^{-1}, Sigma^{-1} mu) for the document-level Gaussian."""
    if np.size(mu) == 0:
        return np.zeros((0, 0)), np.zeros(0)
    L = cholesky_jitter(sigma, "topic covariance")
    Sinv = linalg.cho_solve((L, True), np.eye(L.shape[0]))
    return Sinv, Sinv @ mu


def _local_block(tokens, psi_d, beta, Sinv, Sinv_mu, rng):
    # z_d | theta_d, beta;  omega_d | psi_d, c_d;  psi_d | omega_d, c_d, mu, Sigma
    T = beta.shape[0]
    psi = psi_d.copy()
    z = np.empty(tokens.size, np.int64)
    counts = np.zeros(T, np.int64)
    omega = np.zeros(T - 1)
    if not ctm_local_kernel(tokens, psi, beta, Sinv, Sinv_mu, rng, z, counts, omega):
        raise LinAlgError("ctm_gibbs_sweep: document posterior precision is not positive definite")
    return z, counts, omega, psi


def ctm_gibbs_sweep(state, corpus, rng):
    """One full sweep; returns a new state.

    Document-local blocks run on their own lanes (parallel under
    ``PGMULT_THREADS``); the topic and (mu, Sigma) updates follow serially.
    """
    hyper = state.hyper
    T, V = hyper.n_topics, corpus.vocab_size
    root = sweep_root(rng)
    Sinv, Sinv_mu = information_prior(state.mu, state.sigma)

    def local(d):
        return _local_block(corpus.docs[d], state.psi[d], state.beta, Sinv, Sinv_mu, lane_rng(root, corpus.lanes[d]))

    results = parallel_map(local, range(corpus.n_docs))
    z = [r[0] for r in results]
    counts = np.array([r[1] for r in results], dtype=np.int64).reshape(corpus.n_docs, T)
    omega = np.array([r[2] for r in results]).reshape(corpus.n_docs, T - 1)
    psi = np.array([r[3] for r in results]).reshape(corpus.n_docs, T - 1)

    tokens, _ = corpus.flat()
    flat_z = np.concatenate(z) if z else np.zeros(0, np.int64)
    n_tw = np.bincount(flat_z * V + tokens, minlength=T * V).reshape(T, V)
    beta = sample_dirichlet_rows(hyper.alpha_beta + n_tw, rng)

    if T > 1:
        # sum in lane order so relabeling documents cannot change rounding
        order = np.argsort(corpus.lanes, kind="stable")
        mu, sigma = hyper.niw.posterior(psi[order]).sample(rng)
    else:
        mu, sigma = state.mu, state.sigma
    return CTMState(beta, psi, omega, z, mu, sigma, hyper, counts, n_tw)


def ctm_gibbs(corpus, hyper, sweeps, rng, burn=0, thin=1, state=None, callback=None, warm_sweeps=0):
    """Run a chain and keep every ``thin``-th state after ``burn`` sweeps."""
    state = ctm_init(corpus, hyper, rng, warm_sweeps) if state is None else state
    kept = []
    for s in range(sweeps):
        state = ctm_gibbs_sweep(state, corpus, rng)
        if callback is not None:
            callback(s, state)
        if s >= burn and (s - burn) % thin == 0:
            kept.append(state)
    return kept


def topic_correlation(mu, sigma, rng, n_draws=10_000):
    """Correlation matrix of theta = pi_sb(psi) with psi ~ N(mu, sigma), by Monte Carlo."""
    if np.size(mu) == 0:
        return np.ones((1, 1))
    theta = pi_sb(mvn_sample(mu, sigma, rng, size=n_draws))
    return np.corrcoef(theta, rowvar=False)


def posterior_topic_correlation(samples, rng, n_draws=10_000):
    return np.mean([topic_correlation(s.mu, s.sigma, rng, n_draws) for s in samples], axis=0)
