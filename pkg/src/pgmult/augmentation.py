"""Polya-gamma augmentation of stick-breaking multinomial counts.

Given counts x and stick coordinates psi, the auxiliaries omega_k ~ PG(N_k(x), psi_k)
turn the multinomial likelihood of psi into the diagonal Gaussian factor
exp(kappa_k psi_k - omega_k psi_k^2 / 2).  That factor is carried around in
information form as a :class:`GaussianPotential`.
"""

from dataclasses import dataclass

import numpy as np

from .polya_gamma import sample_pg
from .stick_breaking import kappa, residual_counts


@dataclass
class GaussianPotential:
    """Diagonal Gaussian evidence exp(linear . psi - psi^T diag(precision) psi / 2).

    Arrays may carry leading batch axes (documents, inputs, timesteps).  A zero
    precision entry means that coordinate received no evidence.
    """

    precision: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        self.precision = np.asarray(self.precision, dtype=float)
        self.linear = np.asarray(self.linear, dtype=float)
        if self.precision.shape != self.linear.shape:
            raise ValueError("precision and linear terms must have the same shape")
        if np.any(self.precision < 0):
            raise ValueError("potential precision must be nonnegative")

    def __getitem__(self, idx):
        return GaussianPotential(self.precision[idx], self.linear[idx])

    @classmethod
    def empty(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    def column(self, k):
        return GaussianPotential(self.precision[..., k], self.linear[..., k])


def sample_aux(x, psi, rng):
    """omega_k ~ PG(N_k(x), psi_k) for every stick coordinate (batched over leading axes)."""
    return sample_pg(residual_counts(x), psi, rng)


def evidence(x, omega):
    """Gaussian potential on psi implied by counts ``x`` and auxiliaries ``omega``."""
    return GaussianPotential(omega, kappa(x))
