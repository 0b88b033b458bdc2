"""
Causal mechanisms, dependency masks, fixed-point simulation and hand gradients.
"""

from .checkpoint import (
    mask_from_dict,
    mask_to_dict,
    model_from_sections,
    model_sections,
    read_document,
    sem_from_dict,
    sem_to_dict,
    write_document,
)
from .gradients import GradientBundle, backprop, gradients
from .masks import (
    GumbelMask,
    InterventionMask,
    MaskSample,
    draw_mask,
    expected_mask,
    hard_mask,
    mask_from_noise,
    mask_logit_gradient,
    sample_mask,
)
from .models import LinearSem, MlpSem, SemModel, spectral_normalize
from .solver import epsilon_observed, forward_f, residuals, solve_fixed_point

__all__ = [
    "GumbelMask",
    "InterventionMask",
    "MaskSample",
    "draw_mask",
    "expected_mask",
    "hard_mask",
    "mask_from_noise",
    "mask_logit_gradient",
    "sample_mask",
    "LinearSem",
    "MlpSem",
    "SemModel",
    "spectral_normalize",
    "forward_f",
    "residuals",
    "epsilon_observed",
    "solve_fixed_point",
    "GradientBundle",
    "backprop",
    "gradients",
    "model_sections",
    "model_from_sections",
    "sem_to_dict",
    "sem_from_dict",
    "mask_to_dict",
    "mask_from_dict",
    "read_document",
    "write_document",
]
