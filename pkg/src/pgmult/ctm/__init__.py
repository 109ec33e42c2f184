from .corpus import Corpus
from .gibbs import (
    CTMHyper,
    CTMState,
    ctm_generate,
    ctm_gibbs,
    ctm_gibbs_sweep,
    ctm_init,
    posterior_topic_correlation,
    topic_correlation,
)
from .heldout import heldout_predictive_ll, split_documents
from .lda import LDASample, lda_collapsed_gibbs
from .svi import SVIState, ctm_svi_step, svi_init

__all__ = [
    "CTMHyper",
    "CTMState",
    "Corpus",
    "LDASample",
    "SVIState",
    "ctm_generate",
    "ctm_gibbs",
    "ctm_gibbs_sweep",
    "ctm_init",
    "ctm_svi_step",
    "heldout_predictive_ll",
    "lda_collapsed_gibbs",
    "posterior_topic_correlation",
    "split_documents",
    "svi_init",
    "topic_correlation",
]
