"""The stick-breaking logistic map between R^{K-1} and the K-simplex.

``pi_sb`` sends psi to pi with pi_k = sigma(psi_k) * prod_{j<k} sigma(-psi_j);
the final coordinate is whatever stick is left over.  All functions act on the
last axis, so a stack of vectors can be passed as a 2-d array.

Category order matters: the map is not symmetric under permutation of the
categories, and nothing in here reorders them.
"""

import numpy as np
from scipy.special import gammaln

from .errors import BoundaryError, ParameterError

PSI_CLAMP = 500.0
_MIN_STICK = 1e-300


def log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def _clamped(psi):
    return np.clip(np.asarray(psi, dtype=float), -PSI_CLAMP, PSI_CLAMP)


def log_pi_sb(psi):
    psi = _clamped(psi)
    log_frac = log_sigmoid(psi)
    log_rest = log_sigmoid(-psi)
    # log of the stick remaining before each break, prod_{j<k} sigma(-psi_j)
    pad = np.zeros(psi.shape[:-1] + (1,))
    log_stick = np.concatenate([pad, np.cumsum(log_rest, axis=-1)], axis=-1)
    log_frac = np.concatenate([log_frac, pad], axis=-1)
    return log_stick + log_frac


def pi_sb(psi):
    """Map stick coordinates of length K-1 to a probability vector of length K."""
    return np.exp(log_pi_sb(psi))


def _remaining_sticks(pi):
    # rem[k] = sum_{j >= k} pi_j, accumulated from the right for accuracy
    return np.cumsum(pi[..., ::-1], axis=-1)[..., ::-1]


def _check_interior(pi):
    pi = np.asarray(pi, dtype=float)
    if pi.shape[-1] < 1:
        raise ParameterError("simplex point must have at least one coordinate")
    if np.any(~(pi > 0)):
        raise BoundaryError("simplex point has a zero (or negative) coordinate")
    rem = _remaining_sticks(pi)
    if np.any(rem < _MIN_STICK):
        raise BoundaryError("remaining stick underflows")
    return pi, rem


def pi_sb_inv(pi):
    """Inverse of :func:`pi_sb` for strictly interior simplex points.

    psi_k = log pi_k - log(sum_{j>k} pi_j), which equals
    logit(pi_k / (1 - sum_{j<k} pi_j)) without the cancellation in 1 - cumsum.
    """
    pi, rem = _check_interior(pi)
    return np.log(pi[..., :-1]) - np.log(rem[..., 1:])


def residual_counts(x):
    """N_k = N - sum_{j<k} x_j for k = 1..K-1."""
    x = np.asarray(x)
    rem = np.cumsum(x[..., ::-1], axis=-1)[..., ::-1]
    return rem[..., :-1]


def kappa(x):
    """x_k - N_k / 2 for k = 1..K-1."""
    x = np.asarray(x)
    return x[..., :-1] - residual_counts(x) / 2.0


def log_multinomial_sb(x, psi):
    """Multinomial log-pmf of counts ``x`` at pi = pi_sb(psi), via the binomial chain."""
    x = np.asarray(x)
    psi = _clamped(psi)
    if psi.shape[-1] != x.shape[-1] - 1:
        raise ParameterError("psi must have length K-1")
    n = residual_counts(x)
    xk = x[..., :-1]
    log_binom = gammaln(n + 1) - gammaln(xk + 1) - gammaln(n - xk + 1)
    terms = log_binom + xk * log_sigmoid(psi) + (n - xk) * log_sigmoid(-psi)
    return np.sum(terms, axis=-1)


def log_multinomial(x, pi):
    """Standard multinomial log-pmf; zero-probability categories with zero counts are fine."""
    x = np.asarray(x, dtype=float)
    pi = np.asarray(pi, dtype=float)
    n = x.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(x > 0, x * np.log(pi), 0.0)
    return gammaln(n + 1) - np.sum(gammaln(x + 1), axis=-1) + np.sum(logp, axis=-1)


def inverse_log_jacobian(pi):
    """log |d psi / d pi| for psi = pi_sb_inv(pi), over the first K-1 coordinates of pi.

    Each factor is rem_k / (pi_k * rem_{k+1}) with rem_k = 1 - sum_{j<k} pi_j.
    """
    pi, rem = _check_interior(pi)
    return np.sum(np.log(rem[..., :-1]) - np.log(pi[..., :-1]) - np.log(rem[..., 1:]), axis=-1)


def forward_log_jacobian(psi):
    """log |d pi_{1:K-1} / d psi| = sum_k [log pi_k + log rem_{k+1} - log rem_k], written in psi."""
    psi = _clamped(psi)
    lr = log_sigmoid(-psi)
    log_stick = np.cumsum(lr, axis=-1) - lr
    # pi_k * rem_{k+1} / rem_k = sigma(psi_k) sigma(-psi_k) * prod_{j<k} sigma(-psi_j)
    return np.sum(log_sigmoid(psi) + lr + log_stick, axis=-1)


def _mvn_logpdf(x, mu, sigma):
    x = np.asarray(x, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), x.shape[-1:])
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    chol = np.linalg.cholesky(sigma)
    sol = np.linalg.solve(chol, (x - mu)[..., None])[..., 0]
    d = x.shape[-1]
    return -0.5 * np.sum(sol**2, axis=-1) - np.sum(np.log(np.diag(chol))) - 0.5 * d * np.log(2 * np.pi)


def log_density_pi_given_gaussian(pi, mu, sigma):
    """Log density on the simplex of pi_sb(psi) when psi ~ N(mu, sigma).

    The density is with respect to Lebesgue measure on the first K-1
    coordinates of pi.  Raises ``BoundaryError`` at boundary points and
    ``LinAlgError`` if ``sigma`` is not positive definite.
    """
    return _mvn_logpdf(pi_sb_inv(pi), mu, sigma) + inverse_log_jacobian(pi)


def log_density_psi_given_dirichlet(psi, alpha):
    """Log density of psi = pi_sb_inv(pi) when pi ~ Dirichlet(alpha).

    Factorizes into transformed betas:
    -log B(alpha) + sum_k [alpha_k log sigma(psi_k) + (sum_{j>k} alpha_j) log sigma(-psi_k)].
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~(alpha > 0)):
        raise ParameterError("Dirichlet concentrations must be positive")
    psi = _clamped(psi)
    if psi.shape[-1] != alpha.shape[-1] - 1:
        raise ParameterError("psi must have length K-1")
    tail = np.cumsum(alpha[::-1])[::-1][1:]
    log_beta = np.sum(gammaln(alpha)) - gammaln(np.sum(alpha))
    return np.sum(alpha[:-1] * log_sigmoid(psi) + tail * log_sigmoid(-psi), axis=-1) - log_beta


def sample_psi_from_dirichlet(alpha, size, rng):
    """Draw psi = pi_sb_inv(pi) with pi ~ Dirichlet(alpha) without forming pi.

    With pi proportional to independent gammas g, psi_k = log g_k - log sum_{j>k} g_j.
    """
    alpha = np.asarray(alpha, dtype=float)
    g = rng.standard_gamma(alpha, size=(size, alpha.size))
    tail = np.cumsum(g[:, ::-1], axis=1)[:, ::-1][:, 1:]
    return np.log(g[:, :-1]) - np.log(tail)


def moment_match_dirichlet(alpha, rng, n_mc=100_000):
    """Per-coordinate Monte Carlo mean and variance of psi under Dirichlet(alpha).

    These set a diagonal Gaussian on psi whose pushforward approximates the
    Dirichlet on pi.
    """
    psi = sample_psi_from_dirichlet(alpha, n_mc, rng)
    return psi.mean(axis=0), psi.var(axis=0)


def frequency_order(counts):
    """Category permutation sorting by descending total count (stable on ties)."""
    totals = np.asarray(counts).reshape(-1, np.shape(counts)[-1]).sum(axis=0)
    return np.argsort(-totals, kind="stable")
