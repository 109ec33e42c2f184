"""Collapsed Gibbs sampling for LDA, the comparison baseline."""

from dataclasses import dataclass

import numba
import numpy as np


@dataclass
class LDASample:
    beta: np.ndarray
    theta: np.ndarray
    alpha_theta: float


@numba.njit(cache=True, nogil=True)
def _lda_sweep(tokens, doc_of, z, n_dt, n_tw, n_t, alpha, eta, rng):
    T, V = n_tw.shape
    p = np.empty(T)
    for i in range(tokens.shape[0]):
        w = tokens[i]
        d = doc_of[i]
        t = z[i]
        n_dt[d, t] -= 1
        n_tw[t, w] -= 1
        n_t[t] -= 1
        total = 0.0
        for k in range(T):
            total += (n_dt[d, k] + alpha) * (n_tw[k, w] + eta) / (n_t[k] + V * eta)
            p[k] = total
        u = rng.random() * total
        t = 0
        while t < T - 1 and p[t] < u:
            t += 1
        z[i] = t
        n_dt[d, t] += 1
        n_tw[t, w] += 1
        n_t[t] += 1


@numba.njit(cache=True, nogil=True)
def _lda_foldin(tokens, beta, alpha, n_iter, burn, rng):
    # topic assignments for one new document with the topics held fixed
    T = beta.shape[0]
    N = tokens.shape[0]
    n_t = np.zeros(T)
    z = np.empty(N, np.int64)
    p = np.empty(T)
    for i in range(N):
        z[i] = int(rng.random() * T)
        n_t[z[i]] += 1
    theta_sum = np.zeros(T)
    kept = 0
    for it in range(n_iter):
        for i in range(N):
            w = tokens[i]
            n_t[z[i]] -= 1
            total = 0.0
            for k in range(T):
                total += (n_t[k] + alpha) * beta[k, w]
                p[k] = total
            u = rng.random() * total
            t = 0
            while t < T - 1 and p[t] < u:
                t += 1
            z[i] = t
            n_t[t] += 1
        if it >= burn:
            for k in range(T):
                theta_sum[k] += (n_t[k] + alpha) / (N + T * alpha)
            kept += 1
    return theta_sum / kept


def _init_counts(corpus, T, rng):
    tokens, doc_of = corpus.flat()
    z = rng.integers(0, T, size=tokens.size).astype(np.int64)
    n_dt = np.zeros((corpus.n_docs, T), np.int64)
    n_tw = np.zeros((T, corpus.vocab_size), np.int64)
    np.add.at(n_dt, (doc_of, z), 1)
    np.add.at(n_tw, (z, tokens), 1)
    return tokens, doc_of, z, n_dt, n_tw, n_tw.sum(axis=1)


def lda_collapsed_gibbs(corpus, n_topics, alpha_theta, alpha_beta, sweeps, rng, burn=0, thin=1, callback=None):
    """Collapsed Gibbs over topic assignments; returns point estimates at kept sweeps."""
    T, V = n_topics, corpus.vocab_size
    tokens, doc_of, z, n_dt, n_tw, n_t = _init_counts(corpus, T, rng)
    lengths = corpus.lengths[:, None]
    samples = []
    for s in range(sweeps):
        _lda_sweep(tokens, doc_of, z, n_dt, n_tw, n_t, float(alpha_theta), float(alpha_beta), rng)
        if s >= burn and (s - burn) % thin == 0:
            beta = (n_tw + alpha_beta) / (n_t[:, None] + V * alpha_beta)
            theta = (n_dt + alpha_theta) / (lengths + T * alpha_theta)
            samples.append(LDASample(beta, theta, alpha_theta))
            if callback is not None:
                callback(s, samples[-1])
    return samples


def lda_assignments(corpus, n_topics, alpha_theta, alpha_beta, sweeps, rng):
    """Topic assignment of every token (corpus order) after ``sweeps`` sweeps."""
    tokens, doc_of, z, n_dt, n_tw, n_t = _init_counts(corpus, n_topics, rng)
    for _ in range(sweeps):
        _lda_sweep(tokens, doc_of, z, n_dt, n_tw, n_t, float(alpha_theta), float(alpha_beta), rng)
    return z
