"""Gaussian machinery shared by the model engines.

Everything that consumes Polya-gamma evidence takes it in information form
(diagonal precision plus linear term), which never needs Omega^{-1} kappa and so
is well defined when some precisions are exactly zero.
"""

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import linalg
from scipy.stats import invwishart

from .errors import LinAlgError

JITTER_START = 1e-8
JITTER_MAX = 1e-4


def cholesky_jitter(S, what="matrix"):
    """Lower Cholesky factor, adding diagonal jitter on failure.

    Jitter starts at 1e-8 * mean(diag) and grows tenfold up to 1e-4 * mean(diag).
    """
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return S.copy()
    try:
        return np.linalg.cholesky(S)
    except LinAlgError:
        pass
    scale = np.mean(np.diag(S))
    if not np.isfinite(scale) or scale <= 0:
        raise LinAlgError(f"{what} is not positive definite")
    eye = np.eye(S.shape[0])
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(S + jitter * scale * eye)
        except LinAlgError:
            jitter *= 10
    raise LinAlgError(f"{what} is not positive definite even with jitter {JITTER_MAX:g}")


def mvn_sample(mean, cov, rng, size=None):
    mean = np.asarray(mean, dtype=float)
    chol = cholesky_jitter(cov, "covariance")
    shape = mean.shape if size is None else (size,) + mean.shape
    eps = rng.standard_normal(shape)
    return mean + eps @ chol.T


def sample_information(J, h, rng):
    """Draw from N(J^{-1} h, J^{-1}) given the precision ``J`` and linear term ``h``."""
    L = cholesky_jitter(J, "precision")
    mean = linalg.cho_solve((L, True), h)
    return mean + linalg.solve_triangular(L.T, rng.standard_normal(h.shape), lower=False)


def _evidence_factor(cov, precision):
    s = np.sqrt(precision)
    B = np.eye(s.size) + s[:, None] * cov * s[None, :]
    return s, cholesky_jitter(B, "I + W^1/2 C W^1/2")


def _evidence_solve(cov, s, L, kap, w, mu):
    """(Sigma^{-1} + W)^{-1} (kappa - W mu) without forming the posterior covariance.

    Written as Sigma (tilt + S B^{-1} S^{-1} r), which stays accurate when W is
    huge.  A linear term at zero precision is a pure tilt of the prior mean.
    """
    tilt = np.where(s > 0, 0.0, kap)
    r = kap - tilt - w * (mu + cov @ tilt)
    scaled = np.divide(r, s, out=np.zeros_like(r), where=s > 0)
    return tilt + s * linalg.cho_solve((L, True), scaled)


def gaussian_posterior(mu, cov, potential):
    """Moments of N(mu, cov) reweighted by a diagonal Gaussian potential.

    Returns (mean, cov) of the Gaussian with precision cov^{-1} + diag(w) and
    linear term cov^{-1} mu + kappa, computed without inverting ``cov``.
    """
    mu = np.asarray(mu, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    w, kap = potential.precision, potential.linear
    s, L = _evidence_factor(cov, w)
    V = linalg.solve_triangular(L, s[:, None] * cov, lower=True)
    post_cov = cov - V.T @ V
    post_mean = mu + cov @ _evidence_solve(cov, s, L, kap, w, mu)
    return post_mean, post_cov


def sample_gaussian_posterior(mu, cov, potential, rng, cov_chol=None):
    """Exact draw from the posterior of :func:`gaussian_posterior`.

    Uses the prior-sample-plus-correction construction so that large or zero
    precisions never require factoring the posterior covariance itself.
    """
    mu = np.asarray(mu, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    w, kap = potential.precision, potential.linear
    if cov_chol is None:
        cov_chol = cholesky_jitter(cov, "prior covariance")
    s, L = _evidence_factor(cov, w)
    # a linear term with zero precision is a pure exponential tilt: shift the prior mean
    tilt = np.where(s > 0, 0.0, kap)
    if np.any(tilt):
        mu = mu + cov @ tilt
        kap = kap - tilt
    f = cov_chol @ rng.standard_normal(mu.shape)
    eta = rng.standard_normal(mu.shape)
    r = kap - w * mu
    scaled = np.divide(r, s, out=np.zeros_like(r), where=s > 0)
    u = scaled - s * f - eta
    return mu + f + cov @ (s * linalg.cho_solve((L, True), u))


# ---------------------------------------------------------------------------
# Normal-inverse-Wishart


@dataclass
class NIW:
    """Normal-inverse-Wishart over (mu, Sigma): Sigma ~ IW(nu0, psi0), mu | Sigma ~ N(mean0, Sigma / kappa0)."""

    mean0: np.ndarray
    kappa0: float
    nu0: float
    psi0: np.ndarray

    def __post_init__(self):
        self.mean0 = np.asarray(self.mean0, dtype=float)
        self.psi0 = np.atleast_2d(np.asarray(self.psi0, dtype=float)).reshape(self.dim, self.dim)
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be positive")
        if self.dim and not self.nu0 > self.dim - 1:
            raise ValueError("nu0 must exceed dim - 1")

    @property
    def dim(self):
        return self.mean0.shape[0]

    @classmethod
    def default(cls, dim, nu0=None):
        return cls(np.zeros(dim), 1.0, dim + 2.0 if nu0 is None else nu0, np.eye(dim))

    def posterior(self, data):
        data = np.asarray(data, dtype=float).reshape(-1, self.dim)
        n = data.shape[0]
        if n == 0:
            return self
        xbar = data.mean(axis=0)
        centered = data - xbar
        scatter = centered.T @ centered
        kn = self.kappa0 + n
        diff = xbar - self.mean0
        return NIW(
            (self.kappa0 * self.mean0 + n * xbar) / kn,
            kn,
            self.nu0 + n,
            self.psi0 + scatter + (self.kappa0 * n / kn) * np.outer(diff, diff),
        )

    def sample(self, rng):
        d = self.dim
        if d == 0:
            return np.zeros(0), np.zeros((0, 0))
        sigma = np.atleast_2d(invwishart.rvs(df=self.nu0, scale=self.psi0, random_state=rng)).reshape(d, d)
        sigma = 0.5 * (sigma + sigma.T)
        mu = mvn_sample(self.mean0, sigma / self.kappa0, rng)
        return mu, sigma

    def expected_precision(self):
        """E[Sigma^{-1}] = nu * psi^{-1}."""
        return self.nu0 * np.linalg.inv(self.psi0)

    def expected_precision_mean(self):
        """E[Sigma^{-1} mu] = nu * psi^{-1} mean."""
        return self.expected_precision() @ self.mean0

    def mean_sigma(self):
        return self.psi0 / (self.nu0 - self.dim - 1)


def niw_posterior_sample(prior, data, rng):
    """Draw (mu, Sigma) from the NIW posterior given rows of ``data``."""
    return prior.posterior(data).sample(rng)


# ---------------------------------------------------------------------------
# Gaussian processes


@dataclass
class SquaredExponential:
    lengthscales: np.ndarray
    variance: float = 1.0

    def __call__(self, X, Y=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
        ell = np.broadcast_to(np.asarray(self.lengthscales, dtype=float), X.shape[1:])
        diff = (X[:, None, :] - Y[None, :, :]) / ell
        return self.variance * np.exp(-0.5 * np.sum(diff**2, axis=-1))


@dataclass
class WhiteNoise:
    """Kernel that decouples inputs: variance on exact input matches, zero elsewhere."""

    variance: float = 1.0

    def __call__(self, X, Y=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
        same = np.all(X[:, None, :] == Y[None, :, :], axis=-1)
        return self.variance * same.astype(float)


@dataclass
class GPSpec:
    """A GP prior over one latent function per stick coordinate, with a shared kernel."""

    kernel: object
    inputs: np.ndarray
    mean: np.ndarray
    _gram: np.ndarray = field(default=None, init=False, repr=False)
    _chol: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))

    @property
    def gram(self):
        if self._gram is None:
            self._gram = self.kernel(self.inputs)
        return self._gram

    @property
    def gram_chol(self):
        if self._chol is None:
            self._chol = cholesky_jitter(self.gram, "GP Gram matrix")
        return self._chol


def gp_conditional(spec, potential, k):
    """Posterior (mean, cov) of the k-th latent function at the training inputs."""
    M = spec.inputs.shape[0]
    return gaussian_posterior(np.full(M, spec.mean[k]), spec.gram, potential)


def gp_predict_marginal(spec, potential, k, test_inputs, full_cov=False):
    """Predictive (mean, cov or var) at ``test_inputs`` with the training latents integrated out.

    Conditions the joint GP on the diagonal evidence at the training inputs only.
    """
    Xs = np.atleast_2d(np.asarray(test_inputs, dtype=float))
    C = spec.gram
    Cst = spec.kernel(Xs, spec.inputs)
    mu = spec.mean[k]
    w, kap = potential.precision, potential.linear
    s, L = _evidence_factor(C, w)
    mean = mu + Cst @ _evidence_solve(C, s, L, kap, w, np.full(C.shape[0], mu))
    V = linalg.solve_triangular(L, s[:, None] * Cst.T, lower=True)
    if full_cov:
        return mean, spec.kernel(Xs) - V.T @ V
    kss = np.diag(spec.kernel(Xs)) if not hasattr(spec.kernel, "diag") else spec.kernel.diag(Xs)
    return mean, kss - np.sum(V * V, axis=0)


# ---------------------------------------------------------------------------
# Linear dynamical systems


@dataclass
class LDSParams:
    """z_1 ~ N(mu0, Sigma0); z_t = A z_{t-1} + N(0, B); psi_t = C z_t + d."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    mu0: np.ndarray
    Sigma0: np.ndarray
    d: np.ndarray = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        D = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(D, D)
        self.C = np.asarray(self.C, dtype=float).reshape(-1, D)
        self.mu0 = np.asarray(self.mu0, dtype=float).reshape(D)
        self.Sigma0 = np.asarray(self.Sigma0, dtype=float).reshape(D, D)
        self.d = np.zeros(self.C.shape[0]) if self.d is None else np.asarray(self.d, dtype=float).reshape(-1)

    @property
    def state_dim(self):
        return self.A.shape[0]

    @property
    def obs_dim(self):
        return self.C.shape[0]

    def copy(self):
        return LDSParams(self.A.copy(), self.B.copy(), self.C.copy(), self.mu0.copy(), self.Sigma0.copy(), self.d.copy())


@numba.njit(cache=True)
def _chol_inplace(M, L):
    # row-oriented so the inner products run over contiguous memory
    n = M.shape[0]
    for i in range(n):
        for j in range(i + 1):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if not s > 0.0:
                    return False
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
        for j in range(i + 1, n):
            L[i, j] = 0.0
    return True


@numba.njit(cache=True)
def _chol_jitter(M, L):
    if _chol_inplace(M, L):
        return True
    n = M.shape[0]
    scale = 0.0
    for i in range(n):
        scale += M[i, i]
    scale /= n
    if not scale > 0.0:
        return False
    jitter = JITTER_START
    work = M.copy()
    while jitter <= JITTER_MAX * (1 + 1e-9):
        for i in range(n):
            work[i, i] = M[i, i] + jitter * scale
        if _chol_inplace(work, L):
            return True
        jitter *= 10.0
    return False


@numba.njit(cache=True)
def _solve_lower(L, b, out):
    n = L.shape[0]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * out[k]
        out[i] = s / L[i, i]


@numba.njit(cache=True)
def _solve_upper_t(L, b, out):
    # solves L^T x = b, eliminating with rows of L
    n = L.shape[0]
    for i in range(n):
        out[i] = b[i]
    for i in range(n - 1, -1, -1):
        out[i] /= L[i, i]
        xi = out[i]
        for k in range(i):
            out[k] -= L[i, k] * xi


@numba.njit(cache=True)
def _spd_inverse(L, Linv, out):
    # out = (L L^T)^{-1} = Linv^T Linv, built row by row
    n = L.shape[0]
    for i in range(n):
        for j in range(n):
            Linv[i, j] = 0.0
        Linv[i, i] = 1.0
        for k in range(i):
            a = L[i, k]
            for j in range(k + 1):
                Linv[i, j] -= a * Linv[k, j]
        d = L[i, i]
        for j in range(i + 1):
            Linv[i, j] /= d
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    for k in range(n):
        for i in range(k + 1):
            a = Linv[k, i]
            for j in range(k + 1):
                out[i, j] += a * Linv[k, j]


@numba.njit(cache=True, nogil=True)
def _ffbs_kernel(A, B, C, d, mu0, S0, prec, lin, rng, z):
    T, P = prec.shape
    D = A.shape[0]
    Jf = np.zeros((T, D, D))
    hf = np.zeros((T, D))
    L = np.zeros((D, D))
    Linv = np.zeros((D, D))
    Jpred = np.zeros((D, D))
    X = np.zeros((D, D))
    Ppred = S0.copy()
    mpred = mu0.copy()
    tmp = np.zeros(D)
    tmp2 = np.zeros(D)
    for t in range(T):
        if not _chol_jitter(Ppred, L):
            return t
        _spd_inverse(L, Linv, Jpred)
        J = Jf[t]
        for i in range(D):
            acc = 0.0
            for k in range(D):
                acc += Jpred[i, k] * mpred[k]
            hf[t, i] = acc
            for j in range(D):
                J[i, j] = Jpred[i, j]
        # information-form evidence C^T diag(w) C and C^T (lin - w d): O(D^2 P)
        for p in range(P):
            w = prec[t, p]
            r = lin[t, p] - w * d[p]
            if w != 0.0:
                for i in range(D):
                    cw = C[p, i] * w
                    for j in range(D):
                        J[i, j] += cw * C[p, j]
            if r != 0.0:
                for i in range(D):
                    hf[t, i] += C[p, i] * r
        if not _chol_jitter(J, L):
            return t
        # filtered mean J^{-1} h, then predicted moments A J^{-1} A^T + B via X = A L^{-T}
        _solve_lower(L, hf[t], tmp)
        _solve_upper_t(L, tmp, tmp2)
        for i in range(D):
            acc = 0.0
            for k in range(D):
                acc += A[i, k] * tmp2[k]
            mpred[i] = acc
            _solve_lower(L, A[i], X[i])
        for i in range(D):
            for j in range(i + 1):
                acc = 0.0
                for k in range(D):
                    acc += X[i, k] * X[j, k]
                Ppred[i, j] = acc + B[i, j]
                Ppred[j, i] = Ppred[i, j]
    Lb = np.zeros((D, D))
    if not _chol_jitter(B, Lb):
        return T
    Binv = np.zeros((D, D))
    _spd_inverse(Lb, Linv, Binv)
    AtBinv = A.T @ Binv
    AtBinvA = AtBinv @ A
    J = np.zeros((D, D))
    h = np.zeros(D)
    for t in range(T - 1, -1, -1):
        for i in range(D):
            h[i] = hf[t, i]
            for j in range(D):
                J[i, j] = Jf[t, i, j]
        if t < T - 1:
            for i in range(D):
                acc = 0.0
                for k in range(D):
                    acc += AtBinv[i, k] * z[t + 1, k]
                h[i] += acc
                for j in range(D):
                    J[i, j] += AtBinvA[i, j]
        if not _chol_jitter(J, L):
            return t
        # z_t = J^{-1} h + L^{-T} eps
        _solve_lower(L, h, tmp)
        for i in range(D):
            tmp[i] += rng.standard_normal()
        _solve_upper_t(L, tmp, tmp2)
        for i in range(D):
            z[t, i] = tmp2[i]
    return -1


def lds_ffbs(params, potential, rng):
    """Joint draw of z_{1:T} given per-timestep diagonal potentials on psi_t = C z_t + d.

    ``potential`` has arrays of shape (T, K-1); zero precision means no
    evidence.  Work is O(T D^3 + T D^2 K).
    """
    prec = np.ascontiguousarray(potential.precision, dtype=float)
    lin = np.ascontiguousarray(potential.linear, dtype=float)
    T = prec.shape[0]
    if prec.ndim != 2 or prec.shape[1] != params.obs_dim:
        raise ValueError("potential must have shape (T, K-1) matching the emission matrix")
    z = np.zeros((T, params.state_dim))
    status = _ffbs_kernel(
        params.A, params.B, params.C, params.d, params.mu0, params.Sigma0, prec, lin, rng, z
    )
    if status >= 0:
        where = "state noise B" if status == T else f"timestep {status}"
        raise LinAlgError(f"lds_ffbs: covariance not positive definite at {where}")
    return z


def _obs_information(params, potential):
    w, lin = potential.precision, potential.linear
    C = params.C
    J = np.einsum("tp,pi,pj->tij", w, C, C)
    h = (lin - w * params.d) @ C
    return J, h


def lds_filter(params, potential):
    """Kalman filter in information form.

    Returns filtered means, covariances, one-step predicted means and covariances,
    and the log of the integral of prior times potentials (the potentials are
    taken unnormalized, exp(lin . psi - psi^T W psi / 2)).
    """
    Jobs, hobs = _obs_information(params, potential)
    T, D = hobs.shape
    mf = np.zeros((T, D))
    Sf = np.zeros((T, D, D))
    mp = np.zeros((T, D))
    Sp = np.zeros((T, D, D))
    m, P = params.mu0.copy(), params.Sigma0.copy()
    dw = params.d
    # constant part of each potential from the emission offset: lin.d - d^T W d / 2
    const = potential.linear @ dw - 0.5 * potential.precision @ (dw * dw)
    logz = 0.0
    for t in range(T):
        mp[t], Sp[t] = m, P
        Lp = cholesky_jitter(P, f"predicted covariance at timestep {t}")
        Jp = linalg.cho_solve((Lp, True), np.eye(D))
        J = Jp + Jobs[t]
        h = Jp @ m + hobs[t]
        LJ = cholesky_jitter(J, f"filtered precision at timestep {t}")
        S = linalg.cho_solve((LJ, True), np.eye(D))
        mean = S @ h
        logz += (
            0.5 * h @ mean
            - 0.5 * m @ Jp @ m
            - np.sum(np.log(np.diag(LJ)))
            - np.sum(np.log(np.diag(Lp)))
            + const[t]
        )
        mf[t], Sf[t] = mean, S
        m = params.A @ mean
        P = params.A @ S @ params.A.T + params.B
    return mf, Sf, mp, Sp, logz


def lds_smooth(params, potential):
    """Rauch-Tung-Striebel smoothed marginal means and covariances."""
    mf, Sf, mp, Sp, _ = lds_filter(params, potential)
    T = mf.shape[0]
    ms, Ss = mf.copy(), Sf.copy()
    A = params.A
    for t in range(T - 2, -1, -1):
        G = np.linalg.solve(Sp[t + 1].T, (Sf[t] @ A.T).T).T
        ms[t] = mf[t] + G @ (ms[t + 1] - mp[t + 1])
        Ss[t] = Sf[t] + G @ (Ss[t + 1] - Sp[t + 1]) @ G.T
    return ms, Ss


def lds_log_normalizer(params, potential):
    return lds_filter(params, potential)[4]


# ---------------------------------------------------------------------------
# Conjugate parameter updates


@dataclass
class MNIW:
    """Matrix-normal inverse-Wishart prior for y_t = A x_t + N(0, B).

    B ~ IW(nu0, psi0); A | B ~ MN(M0, B, V0) with V0 the column covariance.
    """

    M0: np.ndarray
    V0: np.ndarray
    nu0: float
    psi0: np.ndarray

    @classmethod
    def default(cls, D):
        return cls(np.zeros((D, D)), np.eye(D), D + 2.0, np.eye(D))


def sample_dynamics(states, prior, rng):
    """Draw (A, B) from the MNIW conditional given the state sequence (T >= 2)."""
    z = np.asarray(states, dtype=float)
    X, Y = z[:-1], z[1:]
    V0inv = np.linalg.inv(prior.V0)
    Sxx = X.T @ X + V0inv
    Syx = Y.T @ X + prior.M0 @ V0inv
    Syy = Y.T @ Y + prior.M0 @ V0inv @ prior.M0.T
    Lxx = cholesky_jitter(Sxx, "dynamics scatter")
    Mn = linalg.cho_solve((Lxx, True), Syx.T).T
    Sn = Syy - Mn @ Syx.T + prior.psi0
    Sn = 0.5 * (Sn + Sn.T)
    D = z.shape[1]
    B = np.atleast_2d(invwishart.rvs(df=prior.nu0 + X.shape[0], scale=Sn, random_state=rng)).reshape(D, D)
    B = 0.5 * (B + B.T)
    # A = Mn + chol(B) E chol(Sxx^{-1})^T
    LB = cholesky_jitter(B, "state noise")
    E = rng.standard_normal(Mn.shape)
    A = Mn + LB @ linalg.solve_triangular(Lxx, E.T, lower=True, trans="T").T
    return A, B


def sample_emission(states, potential, rng, prior_mean=None, prior_precision=None, bias=True):
    """Row-wise conjugate draw of the emission matrix (and offset) under diagonal evidence.

    Row k solves a Bayesian linear regression of psi_{t,k} on [z_t, 1] with the
    Gaussian factor exp(lin_{t,k} psi - prec_{t,k} psi^2 / 2) per timestep.
    Returns ``(C, d)``; ``d`` is zeros when ``bias`` is False.
    """
    z = np.asarray(states, dtype=float)
    T, D = z.shape
    w, lin = potential.precision, potential.linear
    P = w.shape[1]
    X = np.hstack([z, np.ones((T, 1))]) if bias else z
    q = X.shape[1]
    if prior_mean is None:
        prior_mean = np.zeros((P, q))
    if prior_precision is None:
        prior_precision = np.eye(q)
    outer = (X[:, :, None] * X[:, None, :]).reshape(T, q * q)
    J = prior_precision[None] + (w.T @ outer).reshape(P, q, q)
    h = prior_mean @ prior_precision.T + lin.T @ X
    L = np.linalg.cholesky(J)
    mean = np.linalg.solve(J, h[..., None])[..., 0]
    eps = rng.standard_normal((P, q, 1))
    draw = mean + np.linalg.solve(np.swapaxes(L, -1, -2), eps)[..., 0]
    if bias:
        return draw[:, :D], draw[:, D]
    return draw, np.zeros(P)
