"""Document-completion likelihood: predict half of each test document from the other half."""

import numpy as np

from ..errors import LinAlgError
from ..rng import chain_rng, lane_rng, parallel_map
from .gibbs import information_prior
from .kernels import ctm_foldin_kernel
from .lda import LDASample, _lda_foldin


def split_documents(docs, split_ratio, rng):
    """Random (observed, held-out) split of every document's tokens."""
    out = []
    for doc in docs:
        doc = np.asarray(doc, dtype=np.int64)
        perm = rng.permutation(doc.size)
        n_obs = int(np.floor(doc.size * split_ratio))
        out.append((doc[np.sort(perm[:n_obs])], doc[np.sort(perm[n_obs:])]))
    return out


def ctm_foldin(tokens, beta, mu, sigma, rng, n_iter=40, burn=10):
    """Average theta over a local Gibbs run on one document with the globals fixed."""
    T = beta.shape[0]
    Sinv, Sinv_mu = information_prior(mu, sigma)
    theta = np.zeros(T)
    mu = np.asarray(mu, dtype=float).reshape(T - 1)
    if not ctm_foldin_kernel(tokens, beta, mu, Sinv, Sinv_mu, n_iter, burn, rng, theta):
        raise LinAlgError("heldout_predictive_ll: document posterior precision is not positive definite")
    return theta


def _foldin(sample, beta, tokens, rng, n_iter, burn):
    if isinstance(sample, LDASample):
        return _lda_foldin(tokens, beta, float(sample.alpha_theta), n_iter, burn, rng)
    return ctm_foldin(tokens, beta, sample.mu, sample.sigma, rng, n_iter, burn)


def predictive_beta(sample):
    return getattr(sample, "predictive_beta", sample.beta)


def heldout_predictive_ll(samples, test_docs, split_ratio=0.5, eval_seed=0, n_iter=40, burn=10):
    """Per-token log predictive probability of the held-out halves.

    For each document and posterior sample, theta is inferred from the
    observed half by local Gibbs with the sample's globals fixed.  The
    predictive probability of a held-out token averages theta . beta[:, w]
    over kept iterations and samples.  The split and all local chains are
    keyed by ``eval_seed`` alone, so two models see identical splits.
    Gibbs samples contribute E[beta | z] rather than their sampled beta.
    Documents without held-out tokens are skipped.
    """
    if not samples:
        raise ValueError("need at least one posterior sample")
    splits = split_documents(test_docs, split_ratio, chain_rng(eval_seed, 0))
    root = int(chain_rng(eval_seed, 1).integers(0, 2**63 - 1))
    betas = [np.ascontiguousarray(predictive_beta(s)) for s in samples]

    def doc_logprob(d):
        observed, held = splits[d]
        if held.size == 0:
            return 0.0, 0
        prob = np.zeros(held.size)
        for s, (sample, beta) in enumerate(zip(samples, betas)):
            rng = lane_rng(root, d * len(samples) + s)
            theta = _foldin(sample, beta, observed, rng, n_iter, burn)
            prob += theta @ beta[:, held]
        return float(np.sum(np.log(prob / len(samples)))), held.size

    results = parallel_map(doc_logprob, range(len(test_docs)))
    total = sum(r[0] for r in results)
    count = sum(r[1] for r in results)
    if count == 0:
        raise ValueError("no held-out tokens to score")
    return total / count
