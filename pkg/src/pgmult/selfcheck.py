"""Fast built-in invariant suite behind ``pgmult selfcheck``.

Each check returns (passed, detail).  Checks use fixed seeds, so the suite is
deterministic and its report can be diffed between runs.
"""

import itertools

import numpy as np
from scipy.special import gammaln

from .augmentation import GaussianPotential, evidence, sample_aux
from .gaussian import LDSParams, gaussian_posterior, lds_log_normalizer
from .mult_lds import normalized_ll
from .polya_gamma import pg_mean, sample_pg
from .stick_breaking import (
    forward_log_jacobian,
    inverse_log_jacobian,
    log_multinomial_sb,
    pi_sb,
    pi_sb_inv,
)


def check_pg_mean_limit():
    err = max(abs(pg_mean(b, 1e-9) - b / 4) for b in (1.0, 2.0, 5.0, 20.0))
    return err < 1e-9, f"max |pg_mean(b, 1e-9) - b/4| = {err:.2e}"


def check_pg_sampler():
    rng = np.random.default_rng(0)
    worst = 0.0
    for b, c in itertools.product((1, 2, 5, 30), (0.0, 2.0)):
        draws = sample_pg(np.full(20_000, b), np.full(20_000, c), rng)
        z = abs(draws.mean() - pg_mean(b, c)) / (draws.std() / np.sqrt(draws.size))
        worst = max(worst, z)
    return worst < 4.5, f"worst standardized mean error {worst:.2f}"


def _compositions(n, k):
    for cuts in itertools.combinations(range(n + k - 1), k - 1):
        bounds = (-1,) + cuts + (n + k - 1,)
        yield [bounds[i + 1] - bounds[i] - 1 for i in range(k)]


def check_stick_breaking_pmf():
    rng = np.random.default_rng(1)
    worst, worst_sum = 0.0, 0.0
    for K in (2, 3, 4):
        psi = rng.normal(0, 2, K - 1)
        pi = pi_sb(psi)
        for N in range(0, 6):
            xs = np.array(list(_compositions(N, K)))
            sb = np.exp(log_multinomial_sb(xs, psi))
            brute = np.exp(gammaln(N + 1) - gammaln(xs + 1).sum(axis=1) + (xs * np.log(pi)).sum(axis=1))
            worst = max(worst, np.max(np.abs(sb / brute - 1)))
            worst_sum = max(worst_sum, abs(sb.sum() - 1))
    return worst < 1e-10 and worst_sum < 1e-9, f"rel err {worst:.1e}, sum err {worst_sum:.1e}"


def check_roundtrip_and_jacobian():
    rng = np.random.default_rng(2)
    psi = rng.normal(0, 1.5, 4)
    round_err = np.max(np.abs(pi_sb_inv(pi_sb(psi)) - psi))
    h = 1e-6
    jac = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        jac[:, j] = (pi_sb(psi + e)[:4] - pi_sb(psi - e)[:4]) / (2 * h)
    fd = np.log(abs(np.linalg.det(jac)))
    rel = abs(forward_log_jacobian(psi) - fd) / abs(fd)
    inv = abs(forward_log_jacobian(psi) + inverse_log_jacobian(pi_sb(psi)))
    ok = round_err < 1e-10 and rel < 1e-5 and inv < 1e-10
    return ok, f"roundtrip {round_err:.1e}, fd rel {rel:.1e}, inverse {inv:.1e}"


def check_gaussian_posterior():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(4, 4))
    cov = A @ A.T + 0.5 * np.eye(4)
    mu = rng.normal(size=4)
    pot = GaussianPotential(np.array([0.0, 1.3, 0.2, 4.0]), rng.normal(size=4))
    mean, post = gaussian_posterior(mu, cov, pot)
    J = np.linalg.inv(cov) + np.diag(pot.precision)
    dense_cov = np.linalg.inv(J)
    dense_mean = dense_cov @ (np.linalg.solve(cov, mu) + pot.linear)
    err = max(np.max(np.abs(mean - dense_mean)), np.max(np.abs(post - dense_cov)))
    return err < 1e-8, f"max dense-oracle error {err:.1e}"


def check_lds_normalizer():
    # T=2, D=1, K=2: the log integral is a 2-d Gaussian integral done densely
    p = LDSParams(np.array([[0.8]]), np.array([[0.5]]), np.array([[1.2]]), np.array([0.3]), np.array([[1.0]]),
                  d=np.array([0.1]))
    pot = GaussianPotential(np.array([[0.7], [1.5]]), np.array([[0.4], [-0.2]]))
    prec = np.linalg.inv(np.array([[1.0, 0.8], [0.8, 0.8 * 0.8 + 0.5]]))
    m = np.array([0.3, 0.24])
    w = pot.precision[:, 0] * 1.44
    lin = (pot.linear[:, 0] - pot.precision[:, 0] * 0.1) * 1.2
    const = np.sum(pot.linear[:, 0] * 0.1 - 0.5 * pot.precision[:, 0] * 0.01)
    J = prec + np.diag(w)
    h = prec @ m + lin
    dense = (0.5 * h @ np.linalg.solve(J, h) - 0.5 * m @ prec @ m
             + 0.5 * np.linalg.slogdet(prec)[1] - 0.5 * np.linalg.slogdet(J)[1] + const)
    err = abs(lds_log_normalizer(p, pot) - dense)
    return err < 1e-10, f"|filter - dense| = {err:.1e}"


def check_augmentation_zeros():
    rng = np.random.default_rng(4)
    x = np.array([[3, 0, 0, 0], [0, 2, 1, 0], [1, 1, 1, 1]])
    omega = sample_aux(x, rng.normal(size=(3, 3)), rng)
    pot = evidence(x, omega)
    from .stick_breaking import residual_counts

    zero_ok = np.array_equal(omega == 0, residual_counts(x) == 0)
    return bool(zero_ok and np.all(pot.precision >= 0)), "omega is zero exactly where residual counts are"


def check_normalization_anchor():
    rng = np.random.default_rng(5)
    train = rng.multinomial(20, [0.5, 0.3, 0.2], size=30)
    future = rng.multinomial(20, [0.5, 0.3, 0.2], size=5)
    from .mult_lds import training_frequencies
    from .stick_breaking import log_multinomial

    value = normalized_ll(log_multinomial(future, training_frequencies(train)), future, train)
    return value == 0.0, f"training-mean multinomial scores {value!r}"


CHECKS = [
    ("pg_mean_small_c_limit", check_pg_mean_limit),
    ("pg_sampler_means", check_pg_sampler),
    ("stick_breaking_pmf_exact", check_stick_breaking_pmf),
    ("stick_breaking_roundtrip_jacobian", check_roundtrip_and_jacobian),
    ("gaussian_posterior_dense_oracle", check_gaussian_posterior),
    ("lds_log_normalizer_dense_oracle", check_lds_normalizer),
    ("augmentation_zero_pattern", check_augmentation_zeros),
    ("normalized_ll_anchor", check_normalization_anchor),
]


def run_selfcheck():
    """List of {"name", "passed", "detail"} for every built-in check."""
    report = []
    for name, fn in CHECKS:
        passed, detail = fn()
        report.append({"name": name, "passed": bool(passed), "detail": detail})
    return report
