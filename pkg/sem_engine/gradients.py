"""
Backpropagation through the mechanisms and the relaxed mask.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .masks import MaskSample, mask_logit_gradient
from .models import Params, SemModel


@dataclass
class GradientBundle:
    """Accumulated gradients w.r.t. the model tensors and the mask values M."""

    params: Params = field(default_factory=dict)
    mask: Optional[np.ndarray] = None

    def add(self, params: Params, grad_mask: Optional[np.ndarray] = None) -> "GradientBundle":
        for name, value in params.items():
            self.params[name] = self.params[name] + value if name in self.params else np.array(value, dtype=float)
        if grad_mask is not None:
            self.mask = grad_mask.copy() if self.mask is None else self.mask + grad_mask
        return self

    def scale(self, factor: float) -> "GradientBundle":
        self.params = {name: factor * value for name, value in self.params.items()}
        if self.mask is not None:
            self.mask = factor * self.mask
        return self


def backprop(
    model: SemModel,
    mask_values: np.ndarray,
    x: np.ndarray,
    adjoint: Optional[np.ndarray] = None,
    jacobian_terms: Iterable[Tuple[np.ndarray, np.ndarray]] = (),
    bundle: Optional[GradientBundle] = None,
) -> GradientBundle:
    """Accumulate gradients of an objective built from F(x) and Jacobian products.

    Args:
        model: Mechanism the objective was evaluated with
        mask_values: Mask M used in the forward pass
        x: (n, K) evaluation points
        adjoint: dObjective/dF(x) per row, or None
        jacobian_terms: (u, v) pairs whose objective contribution is sum_n u_n^T J(x_n) v_n
        bundle: Accumulator to extend (a fresh one when None)

    Returns:
        The updated bundle
    """
    bundle = bundle if bundle is not None else GradientBundle()
    if adjoint is not None:
        bundle.add(*model.vjp(x, mask_values, adjoint))
    for u, v in jacobian_terms:
        bundle.add(*model.bilinear_grad(x, mask_values, u, v))
    return bundle


def gradients(
    model: SemModel,
    sample: MaskSample,
    x: np.ndarray,
    adjoint: Optional[np.ndarray] = None,
    jacobian_terms: Iterable[Tuple[np.ndarray, np.ndarray]] = (),
    bundle: Optional[GradientBundle] = None,
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Parameter gradients and mask-logit gradients (through the soft relaxation).

    A precomputed ``bundle`` (e.g. from the log-density backward pass) is split
    as is; otherwise ``adjoint`` and ``jacobian_terms`` are backpropagated first.
    """
    if bundle is None:
        bundle = backprop(model, sample.values, x, adjoint, jacobian_terms)
    grad_mask = bundle.mask if bundle.mask is not None else np.zeros_like(sample.values)
    params = {name: bundle.params.get(name, np.zeros_like(value)) for name, value in model.params().items()}
    return params, mask_logit_gradient(sample, grad_mask)
