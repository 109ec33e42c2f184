"""Stick-breaking multinomial models with Polya-gamma augmentation."""

from .augmentation import GaussianPotential, evidence, sample_aux
from .polya_gamma import pg_mean, sample_pg
from .stick_breaking import (
    kappa,
    log_multinomial_sb,
    pi_sb,
    pi_sb_inv,
    residual_counts,
)

__version__ = "0.1.0"

__all__ = [
    "GaussianPotential",
    "evidence",
    "kappa",
    "log_multinomial_sb",
    "pg_mean",
    "pi_sb",
    "pi_sb_inv",
    "residual_counts",
    "sample_aux",
    "sample_pg",
]
