"""
E-step imputation: exact Gaussian posteriors and rejection sampling.
"""

from .batch import ImputedBatch, interventions_of
from .config import RejectionConfig
from .gaussian import gaussian_posterior, impute_gaussian, interventional_precision
from .rejection import (
    RejectionSampler,
    impute_rejection,
    log_posterior_weight,
    log_posterior_weight_rows,
    posterior_weight,
    proposal_centers,
)

__all__ = [
    "RejectionConfig",
    "ImputedBatch",
    "interventions_of",
    "interventional_precision",
    "gaussian_posterior",
    "impute_gaussian",
    "RejectionSampler",
    "impute_rejection",
    "posterior_weight",
    "log_posterior_weight",
    "log_posterior_weight_rows",
    "proposal_centers",
]
