"""Compiled per-document updates for the topic model (information form, small T)."""

import math

import numba
import numpy as np

from ..gaussian import _chol_jitter, _solve_lower, _solve_upper_t
from ..polya_gamma import _pg_fill
from ..stick_breaking import PSI_CLAMP


@numba.njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@numba.njit(cache=True)
def pi_sb_kernel(psi, out):
    stick = 0.0
    K1 = psi.shape[0]
    for k in range(K1):
        x = min(max(psi[k], -PSI_CLAMP), PSI_CLAMP)
        out[k] = math.exp(stick + _log_sigmoid(x))
        stick += _log_sigmoid(-x)
    out[K1] = math.exp(stick)


@numba.njit(cache=True)
def _sample_z(tokens, theta, beta, rng, z, counts):
    T = theta.shape[0]
    p = np.empty(T)
    counts[:] = 0
    for n in range(tokens.shape[0]):
        w = tokens[n]
        total = 0.0
        for t in range(T):
            total += theta[t] * beta[t, w]
            p[t] = total
        u = rng.random() * total
        t = 0
        while t < T - 1 and p[t] < u:
            t += 1
        z[n] = t
        counts[t] += 1


@numba.njit(cache=True)
def _psi_given_omega(counts, omega, Sinv, Sinv_mu, rng, psi, L, tmp, tmp2):
    # psi ~ N(J^{-1} h, J^{-1}) with J = Sigma^{-1} + diag(omega), h = Sigma^{-1} mu + kappa(c)
    K1 = psi.shape[0]
    J = Sinv.copy()
    h = Sinv_mu.copy()
    rem = 0
    for t in range(counts.shape[0]):
        rem += counts[t]
    for k in range(K1):
        J[k, k] += omega[k]
        h[k] += counts[k] - 0.5 * rem
        rem -= counts[k]
    if not _chol_jitter(J, L):
        return False
    _solve_lower(L, h, tmp)
    for k in range(K1):
        tmp[k] += rng.standard_normal()
    _solve_upper_t(L, tmp, tmp2)
    for k in range(K1):
        psi[k] = tmp2[k]
    return True


@numba.njit(cache=True)
def _omega_given_psi(counts, psi, rng, omega):
    K1 = psi.shape[0]
    b = np.empty(K1, np.int64)
    rem = 0
    for t in range(counts.shape[0]):
        rem += counts[t]
    for k in range(K1):
        b[k] = rem
        rem -= counts[k]
    _pg_fill(b, psi, omega, rng)


@numba.njit(cache=True, nogil=True)
def ctm_local_kernel(tokens, psi, beta, Sinv, Sinv_mu, rng, z, counts, omega):
    """z | theta, beta; omega | psi, c; psi | omega, c.  Updates ``psi`` in place."""
    T = beta.shape[0]
    K1 = T - 1
    theta = np.empty(T)
    pi_sb_kernel(psi, theta)
    _sample_z(tokens, theta, beta, rng, z, counts)
    if K1 == 0:
        return True
    _omega_given_psi(counts, psi, rng, omega)
    L = np.zeros((K1, K1))
    return _psi_given_omega(counts, omega, Sinv, Sinv_mu, rng, psi, L, np.zeros(K1), np.zeros(K1))


@numba.njit(cache=True, nogil=True)
def ctm_foldin_kernel(tokens, beta, mu, Sinv, Sinv_mu, n_iter, burn, rng, theta_bar):
    """Local Gibbs on one document with globals fixed; averages theta after ``burn``."""
    T = beta.shape[0]
    K1 = T - 1
    psi = mu.copy()
    theta = np.empty(T)
    z = np.empty(tokens.shape[0], np.int64)
    counts = np.zeros(T, np.int64)
    omega = np.zeros(K1)
    L = np.zeros((K1, K1))
    tmp = np.zeros(K1)
    tmp2 = np.zeros(K1)
    theta_bar[:] = 0.0
    for it in range(n_iter):
        pi_sb_kernel(psi, theta)
        _sample_z(tokens, theta, beta, rng, z, counts)
        if K1 > 0:
            _omega_given_psi(counts, psi, rng, omega)
            if not _psi_given_omega(counts, omega, Sinv, Sinv_mu, rng, psi, L, tmp, tmp2):
                return False
        if it >= burn:
            pi_sb_kernel(psi, theta)
            for t in range(T):
                theta_bar[t] += theta[t]
    for t in range(T):
        theta_bar[t] /= n_iter - burn
    return True
