"""Polya-gamma random variates PG(b, c).

Three tiers, all for integer ``b``:

* ``b == 1``: Devroye-style alternating-series rejection sampler for J*(1, z),
  scaled by 1/4 (exact).
* ``2 <= b <= 20``: sum of ``b`` independent PG(1, c) draws (exact).
* ``b > 20``: the first ``_N_EXACT`` terms of the infinite sum-of-gammas
  representation are drawn exactly; the remaining tail is replaced by a single
  gamma variate whose mean and variance match the tail's.

The infinite-sum representation used throughout is::

    PG(b, c) = 1 / (2 pi^2) * sum_k g_k / ((k - 1/2)^2 + c^2 / (4 pi^2)),
    g_k ~ Gamma(b, 1).
"""

import math

import numba
import numpy as np

from .errors import ParameterError

_TRUNC = 0.64
_TRUNC_RECIP = 1.0 / _TRUNC
_EXACT_SUM_MAX_B = 20
_N_EXACT = 200
_SMALL_C = 1e-4


@numba.njit(cache=True)
def _log_ndtr(x):
    if x > -30.0:
        return math.log(0.5 * math.erfc(-x / math.sqrt(2.0)))
    x2 = x * x
    return -0.5 * x2 - math.log(-x) - 0.5 * math.log(2.0 * math.pi) + math.log1p(-1.0 / x2 + 3.0 / (x2 * x2))


@numba.njit(cache=True)
def _a_coef(n, x):
    k = (n + 0.5) * math.pi
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x > 0.0:
        return math.exp(-1.5 * (math.log(0.5 * math.pi) + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x)
    return 0.0


@numba.njit(cache=True)
def _mass_texpon(z):
    t = _TRUNC
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_ndtr(b)
    xa = x0 + z + _log_ndtr(a)
    qdivp = 4.0 / math.pi * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@numba.njit(cache=True)
def _rtigauss(z, rng):
    # inverse Gaussian IG(1/z, 1) truncated to (0, t)
    t = _TRUNC
    x = t + 1.0
    if _TRUNC_RECIP > z:
        alpha = 0.0
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = rng.standard_normal()
            y *= y
            half_mu = 0.5 * mu
            mu_y = mu * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


@numba.njit(cache=True)
def _pg1(c, rng):
    z = 0.5 * abs(c)
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    p_texpon = _mass_texpon(z)
    while True:
        if rng.random() < p_texpon:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(z, rng)
        s = _a_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _a_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _a_coef(n, x)
                if y > s:
                    break


@numba.njit(cache=True)
def _tail_inv_sq_sum(u, a):
    # integral_u^inf dv / (v^2 + a^2)^2, the midpoint approximation of the
    # series tail sum_{k > n} 1 / ((k - 1/2)^2 + a^2)^2 with u = n
    r = a / u
    if r < 0.1:
        u3 = u * u * u
        r2 = r * r
        return (1.0 / 3.0 - 2.0 * r2 / 5.0 + 3.0 * r2 * r2 / 7.0 - 4.0 * r2 * r2 * r2 / 9.0) / u3
    return (math.atan(a / u) / a - u / (u * u + a * a)) / (2.0 * a * a)


@numba.njit(cache=True)
def _pg_mean_scalar(b, c):
    c = abs(c)
    if c < _SMALL_C:
        return 0.25 * b * (1.0 - c * c / 12.0)
    return 0.5 * b * math.tanh(0.5 * c) / c


@numba.njit(cache=True)
def _pg_gamma_tail(b, c, rng):
    a2 = c * c / (4.0 * math.pi * math.pi)
    head_mean = 0.0
    x = 0.0
    for k in range(1, _N_EXACT + 1):
        d = (k - 0.5) * (k - 0.5) + a2
        head_mean += 1.0 / d
        x += rng.gamma(b, 1.0) / d
    x /= 2.0 * math.pi * math.pi
    head_mean *= b / (2.0 * math.pi * math.pi)
    tail_mean = _pg_mean_scalar(b, c) - head_mean
    tail_var = b / (4.0 * math.pi ** 4) * _tail_inv_sq_sum(float(_N_EXACT), math.sqrt(a2))
    if tail_mean > 0.0 and tail_var > 0.0:
        x += rng.gamma(tail_mean * tail_mean / tail_var, tail_var / tail_mean)
    return x


@numba.njit(cache=True, nogil=True)
def _pg_fill(b, c, out, rng):
    for i in range(out.shape[0]):
        bi = b[i]
        if bi == 0:
            out[i] = 0.0
        elif bi <= _EXACT_SUM_MAX_B:
            s = 0.0
            for _ in range(bi):
                s += _pg1(c[i], rng)
            out[i] = s
        else:
            out[i] = _pg_gamma_tail(float(bi), c[i], rng)


def _check_b(b):
    b = np.asarray(b, dtype=float)
    if np.any(~np.isfinite(b)) or np.any(b < 0):
        raise ParameterError("Polya-gamma shape b must be finite and nonnegative")
    bi = np.rint(b)
    if np.any(bi != b):
        raise ParameterError("sampling requires an integer shape b")
    return bi.astype(np.int64)


def sample_pg(b, c, rng):
    """Draw from PG(b, c), elementwise over broadcast ``b`` and ``c``.

    ``b`` must hold nonnegative integers; ``b == 0`` yields exactly 0.  Returns
    a float for scalar inputs, otherwise an array of the broadcast shape.
    """
    c = np.asarray(c, dtype=float)
    if np.any(~np.isfinite(c)):
        raise ParameterError("Polya-gamma tilt c must be finite")
    bi = _check_b(b)
    bi, c = np.broadcast_arrays(bi, c)
    shape = c.shape
    out = np.empty(c.size)
    _pg_fill(np.ascontiguousarray(bi).ravel(), np.ascontiguousarray(c).ravel(), out, rng)
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def pg_mean(b, c):
    """E[PG(b, c)] = b / (2c) * tanh(c / 2), with the c -> 0 limit b / 4.

    ``b`` may be any nonnegative real (expected counts are fine here).
    """
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    if np.any(b < 0) or np.any(~np.isfinite(b)) or np.any(~np.isfinite(c)):
        raise ParameterError("pg_mean needs finite b >= 0 and finite c")
    small = c < _SMALL_C
    safe_c = np.where(small, 1.0, c)
    out = np.where(small, 0.25 * b * (1.0 - c * c / 12.0), 0.5 * b * np.tanh(0.5 * safe_c) / safe_c)
    return float(out) if out.ndim == 0 else out


def pg_series_moments(b, c, n_terms=200_000):
    """Mean and variance of PG(b, c) summed from the gamma-series representation.

    Slow and only used as a reference; truncation error is below 1e-10
    relative for the default ``n_terms``.
    """
    k = np.arange(1, n_terms + 1, dtype=float)
    a = abs(c) / (2 * np.pi)
    d = (k - 0.5) ** 2 + a * a
    mean = b / (2 * np.pi**2) * (np.sum(1.0 / d) + _tail_inv_sum(n_terms, a))
    var = b / (4 * np.pi**4) * (np.sum(1.0 / d**2) + _tail_inv_sq_sum(float(n_terms), a))
    return mean, var


def _tail_inv_sum(n, a):
    # integral_n^inf dv / (v^2 + a^2)
    return np.arctan(a / n) / a if a > 0 else 1.0 / n
