"""Comparison drivers shared by the CLI and the acceptance suite.

Every driver takes an integer seed and derives all of its streams from it, so
results are reproducible and two models in one comparison never share a stream.
Drivers accept an optional ``Diagnostics`` recorder; recording reads the
chain but never draws from its streams, so it cannot change results.
"""

import time

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ctm import (
    CTMHyper,
    ctm_generate,
    ctm_gibbs,
    ctm_svi_step,
    heldout_predictive_ll,
    lda_collapsed_gibbs,
    posterior_topic_correlation,
    svi_init,
)
from .ctm.svi import step_schedule
from .gaussian import LDSParams, SquaredExponential, mvn_sample
from .io import data_path, text_sequence
from .mult_gp import GPCountData, downsample, multgp_gibbs, multgp_predict, raw_gp_predict, static_predict, topk_eval
from .mult_lds import raw_lds_gibbs, raw_lds_predictive_ll, sbmlds_generate, sbmlds_gibbs, sbmlds_predictive_ll
from .rng import chain_rng
from .stick_breaking import pi_sb, pi_sb_inv

CTM_SIGMA = [[1.5, 1.3], [1.3, 1.5]]


class Diagnostics(list):
    """Rows of (sweep, elapsed_s, metric_name, metric_value)."""

    def __init__(self):
        super().__init__()
        self.start = time.perf_counter()

    def add(self, sweep, name, value):
        self.append((int(sweep), time.perf_counter() - self.start, name, float(value)))


def _kept(s, burn, thin):
    return s >= burn and (s - burn) % thin == 0


# ---------------------------------------------------------------------------
# topic models


def match_topics(beta, true_beta):
    """perm[j] = true topic matched to estimated topic j (minimum total L1 distance)."""
    cost = np.abs(beta[:, None, :] - true_beta[None, :, :]).sum(axis=-1)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(beta.shape[0], np.int64)
    perm[rows] = cols
    return perm


def relabeled_sigma(samples, perm, rng, n_draws=5000):
    """Posterior mean of Cov(psi) after mapping topics onto the true labels.

    Draws of psi from each sample's Gaussian go through pi_sb, the topic
    columns are permuted, and the covariance is taken back in stick coordinates.
    """
    covs = []
    for s in samples:
        theta = pi_sb(mvn_sample(s.mu, s.sigma, rng, size=n_draws))
        relabeled = np.empty_like(theta)
        relabeled[:, perm] = theta
        covs.append(np.atleast_2d(np.cov(pi_sb_inv(relabeled), rowvar=False)))
    return np.mean(covs, axis=0)


def sigma_recovery(samples, truth_beta, truth_sigma, rng):
    """Posterior stick covariance on the planted labels and whether its off-diagonal signs match."""
    perm = match_topics(samples[-1].predictive_beta, np.asarray(truth_beta))
    post = relabeled_sigma(samples, perm, rng)
    truth_sigma = np.atleast_2d(np.asarray(truth_sigma, dtype=float))
    off = ~np.eye(post.shape[0], dtype=bool)
    return {
        "sigma_true": truth_sigma.tolist(),
        "sigma_posterior": post.tolist(),
        "sigma_sign_match": bool(np.all(np.sign(post[off]) == np.sign(truth_sigma[off]))),
    }


def ctm_synthetic(seed, n_topics=3, vocab_size=50, n_docs=200, n_test=100, doc_len=100, sigma=None, alpha_beta=0.1):
    """Training corpus, test corpus and planted state for the topic-model comparison."""
    if sigma is None:
        sigma = CTM_SIGMA if n_topics == 3 else np.eye(n_topics - 1)
    corpus, truth = ctm_generate(
        n_topics, vocab_size, n_docs + n_test, doc_len, chain_rng(seed, 0),
        mu=np.zeros(n_topics - 1), sigma=np.array(sigma, dtype=float), alpha_beta=alpha_beta,
    )
    return corpus.subset(range(n_docs)), corpus.subset(range(n_docs, n_docs + n_test)), truth


def ctm_compare(train, test, n_topics, seed, sweeps=1000, burn=500, thin=25, alpha_beta=0.1, warm_sweeps=50,
                eval_seed=None, split_ratio=0.5, models=("ctm", "lda"), truth=None, diagnostics=None):
    """Held-out per-token LL of the stick-breaking CTM and/or collapsed-Gibbs LDA.

    The CTM chain starts from ``warm_sweeps`` collapsed LDA sweeps.  With a
    planted ``truth`` (anything with beta and sigma) the CTM result also
    reports recovery of the sign pattern of Sigma.
    """
    eval_seed = seed if eval_seed is None else eval_seed

    def score(samples):
        return heldout_predictive_ll(samples, test.docs, split_ratio, eval_seed)

    def recorder(name):
        if diagnostics is None:
            return None

        def cb(s, state):
            if _kept(s, burn, thin):
                diagnostics.add(s, name, score([state]))

        return cb

    out = {}
    if "ctm" in models:
        ctm = ctm_gibbs(
            train, CTMHyper(n_topics, alpha_beta), sweeps, chain_rng(seed, 1), burn=burn, thin=thin,
            callback=recorder("ctm_heldout_ll"), warm_sweeps=warm_sweeps,
        )
        out["ctm_heldout_ll"] = score(ctm)
        out["ctm_topic_correlation"] = posterior_topic_correlation(ctm, chain_rng(seed, 4), n_draws=2000).tolist()
        if truth is not None and n_topics > 1:
            out.update(sigma_recovery(ctm, truth.beta, truth.sigma, chain_rng(seed, 3)))
    if "lda" in models:
        lda = lda_collapsed_gibbs(
            train, n_topics, 1.0 / n_topics, alpha_beta, sweeps, chain_rng(seed, 2), burn=burn, thin=thin,
            callback=recorder("lda_heldout_ll"),
        )
        out["lda_heldout_ll"] = score(lda)
    return out


def ctm_vs_lda(seed, sweeps=1000, burn=500, thin=25, alpha_beta=0.1, warm_sweeps=50, eval_seed=None, diagnostics=None,
               **corpus_kw):
    """The synthetic correlated-corpus comparison."""
    train, test, truth = ctm_synthetic(seed, alpha_beta=alpha_beta, **corpus_kw)
    return ctm_compare(
        train, test, truth.beta.shape[0], seed, sweeps, burn, thin, alpha_beta, warm_sweeps, eval_seed,
        truth=truth, diagnostics=diagnostics,
    )


def svi_run(train, test, n_topics, seed, n_steps=100, step_size=1.0, batch_size=None, alpha_beta=0.1, eval_seed=None,
            split_ratio=0.5, diagnostics=None):
    """SVI with a fresh minibatch (without replacement) each step; returns the held-out LL trace and final state.

    ``step_size=None`` uses the decaying schedule instead of a constant step;
    ``batch_size=None`` means full batch.
    """
    eval_seed = seed if eval_seed is None else eval_seed
    rng = chain_rng(seed, 1)
    state = svi_init(train, CTMHyper(n_topics, alpha_beta), rng)
    D = train.n_docs
    trace = []
    for t in range(n_steps):
        if batch_size is None or batch_size >= D:
            batch = np.arange(D)
        else:
            batch = np.sort(rng.choice(D, batch_size, replace=False))
        rho = step_schedule(t) if step_size is None else step_size
        state = ctm_svi_step(state, train, batch, rho, rng)
        trace.append(heldout_predictive_ll([state.point_estimate()], test.docs, split_ratio, eval_seed))
        if diagnostics is not None:
            diagnostics.add(t, "svi_heldout_ll", trace[-1])
    return trace, state


def svi_vs_gibbs(seed, n_steps=100, step_size=1.0, sweeps=600, burn=300, thin=10, n_topics=3, vocab_size=20, n_docs=30,
                 n_test=20, doc_len=50, diagnostics=None):
    """Full-batch SVI trace of held-out LL next to a Gibbs estimate on the same tiny corpus."""
    train, test, _ = ctm_synthetic(
        seed, n_topics=n_topics, vocab_size=vocab_size, n_docs=n_docs, n_test=n_test, doc_len=doc_len,
        sigma=np.eye(n_topics - 1),
    )
    trace, _ = svi_run(train, test, n_topics, seed, n_steps, step_size, diagnostics=diagnostics)
    gibbs = ctm_gibbs(train, CTMHyper(n_topics), sweeps, chain_rng(seed, 2), burn=burn, thin=thin)
    tail = trace[-10:]
    return {
        "svi_heldout_ll": trace[-1],
        "svi_final_drift": float(max(tail) - min(tail)),
        "gibbs_heldout_ll": heldout_predictive_ll(gibbs, test.docs, eval_seed=seed),
        "svi_trace": trace,
    }


# ---------------------------------------------------------------------------
# count sequences


def lds_synthetic_params(rng, D=3, K=10, angle=0.15, radius=0.98, noise=0.05):
    """Slowly rotating dynamics in the first two state dimensions, random emissions."""
    A = radius * np.eye(D)
    if D >= 2:
        A[:2, :2] = radius * np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    return LDSParams(A, noise * np.eye(D), rng.standard_normal((K - 1, D)), np.zeros(D), np.eye(D), d=np.zeros(K - 1))


def lds_synthetic_data(seed, T=300, D=3, K=10, total=10, noise=0.05, angle=0.15, radius=0.98):
    rng = chain_rng(seed, 0)
    params = lds_synthetic_params(rng, D, K, angle, radius, noise)
    data, states = sbmlds_generate(params, np.full(T, total), rng)
    return data, params, states


def lds_compare(train, future, D, seed, sweeps=2000, burn=1000, thin=50, models=("sbmlds", "rawlds"), diagnostics=None):
    """Normalized predictive LL of the SBM-LDS and/or the raw LDS on the same forecast window."""

    def recorder(name, scorer):
        if diagnostics is None:
            return None
        eval_rng = chain_rng(seed, 5)

        def cb(s, state):
            if _kept(s, burn, thin):
                diagnostics.add(s, name, scorer([state], train, future, eval_rng))

        return cb

    out = {}
    if "sbmlds" in models:
        samples = sbmlds_gibbs(
            train, D, sweeps, chain_rng(seed, 1), burn=burn, thin=thin,
            callback=recorder("sbmlds_normalized_ll", sbmlds_predictive_ll),
        )
        out["sbmlds_normalized_ll"] = sbmlds_predictive_ll(samples, train, future, chain_rng(seed, 2))
    if "rawlds" in models:
        rng = chain_rng(seed, 3)
        samples = raw_lds_gibbs(
            train, D, sweeps, rng, burn=burn, thin=thin, callback=recorder("rawlds_normalized_ll", raw_lds_predictive_ll)
        )
        out["rawlds_normalized_ll"] = raw_lds_predictive_ll(samples, train, future, rng)
    return out


def lds_synthetic(seed, T=300, D=3, K=10, total=10, horizon=10, sweeps=2000, burn=1000, thin=50, diagnostics=None):
    """SBM-LDS against the raw LDS on data simulated from a stick-breaking LDS."""
    data, _, _ = lds_synthetic_data(seed, T, D, K, total)
    train, future = data.split(T - horizon)
    return lds_compare(train, future, D, seed, sweeps, burn, thin, diagnostics=diagnostics)


def lds_text(seed, path=None, vocab_size=200, holdout=100, D=10, sweeps=400, burn=200, thin=10, diagnostics=None):
    """SBM-LDS against the raw LDS on a one-hot word sequence; the final words are forecast."""
    path = data_path("genesis.txt") if path is None else path
    data, _ = text_sequence(path, vocab_size, holdout)
    train, future = data.split(data.obs.shape[0] - holdout)
    return lds_compare(train, future, D, seed, sweeps, burn, thin, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Gaussian-process counts


def multgp_synthetic(seed, M=20, K=25, total=1000, lengthscale=4.0, variance=0.5, zipf=1.0):
    """Counts at inputs 0..M-1 whose category probabilities drift smoothly.

    The mean of each stick coordinate matches a Zipf frequency profile, so
    categories are already in descending order of frequency.
    """
    rng = chain_rng(seed, 0)
    freq = 1.0 / np.arange(1, K + 1) ** zipf
    mean = pi_sb_inv(freq / freq.sum())
    inputs = np.arange(M, dtype=float)[:, None]
    cov = SquaredExponential(lengthscale, variance)(inputs) + 1e-8 * np.eye(M)
    psi = mean + mvn_sample(np.zeros(M), cov, rng, size=K - 1).T
    counts = np.array([rng.multinomial(total, p / p.sum()) for p in pi_sb(psi)])
    return GPCountData(inputs, counts)


def _topk_all(pred, realized, k):
    return [list(topk_eval(p, r, k)) for p, r in zip(pred, realized)]


def multgp_experiment(data, seed, n_test=2, n_obs=50, lengthscale=4.0, variance=0.5, burn=200, n_keep=50, thin=10,
                      k=10, noise_var=1.0, diagnostics=None):
    """Forecast the last ``n_test`` inputs from downsampled earlier ones; top/bottom-k hits per method."""
    M = data.inputs.shape[0]
    if not 0 < n_test < M:
        raise ValueError("n_test must leave at least one training input")
    train_counts = data.counts[: M - n_test]
    if n_obs:
        train_counts = downsample(train_counts, n_obs, chain_rng(seed, 1))
    train = GPCountData(data.inputs[: M - n_test], train_counts, data.categories)
    test_x, realized = data.inputs[M - n_test:], data.counts[M - n_test:]
    kernel = SquaredExponential(lengthscale, variance)

    callback = None
    if diagnostics is not None:
        def callback(s, state):
            if _kept(s, burn, thin):
                pred = multgp_predict([state], train, test_x, chain_rng(seed, 5), n_psi=50)
                diagnostics.add(s, "multgp_topk_hits", np.sum(_topk_all(pred, realized, k)))

    sweeps = burn + n_keep * thin
    samples = multgp_gibbs(train, kernel, sweeps, chain_rng(seed, 2), burn=burn, thin=thin, callback=callback)[:n_keep]
    pred = multgp_predict(samples, train, test_x, chain_rng(seed, 3))
    return {
        "multgp": _topk_all(pred, realized, k),
        "rawgp": _topk_all(raw_gp_predict(train, kernel, test_x, noise_var), realized, k),
        "static": _topk_all(static_predict(train, test_x), realized, k),
        "predicted_mean": pred.tolist(),
    }
