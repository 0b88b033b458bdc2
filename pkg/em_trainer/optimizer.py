"""
Adam on named parameter tensors, used for gradient ascent.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from shared.constants import ADAM_BETAS, ADAM_EPS
from shared.exceptions import NonFiniteGradientError

Tensors = Dict[str, np.ndarray]


@dataclass
class AdamOptimizer:
    """
    Adam moments per named tensor.

    Each tensor keeps its own step count, so parameters updated on alternate
    minibatches get their own bias correction.
    """

    learning_rate: float
    betas: Tuple[float, float] = ADAM_BETAS
    eps: float = ADAM_EPS
    first: Tensors = field(default_factory=dict)
    second: Tensors = field(default_factory=dict)
    steps: Dict[str, int] = field(default_factory=dict)

    def ascend(self, params: Tensors, grads: Tensors) -> Tensors:
        """
        One ascent step on every tensor that has a gradient.

        Args:
            params: Current values by name
            grads: Gradients of the objective to maximize

        Returns:
            Updated values (tensors without a gradient are returned as is)

        Raises:
            NonFiniteGradientError: some gradient holds NaN or infinity
        """
        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise NonFiniteGradientError(f"non-finite gradient for '{name}'")
        b1, b2 = self.betas
        updated = dict(params)
        for name, grad in grads.items():
            t = self.steps.get(name, 0) + 1
            m = b1 * self.first.get(name, np.zeros_like(grad)) + (1 - b1) * grad
            v = b2 * self.second.get(name, np.zeros_like(grad)) + (1 - b2) * grad**2
            self.first[name], self.second[name], self.steps[name] = m, v, t
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            updated[name] = params[name] + self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated

    def to_dict(self):
        return {
            "learning_rate": self.learning_rate,
            "betas": list(self.betas),
            "eps": self.eps,
            "first": {name: value.tolist() for name, value in sorted(self.first.items())},
            "second": {name: value.tolist() for name, value in sorted(self.second.items())},
            "steps": dict(sorted(self.steps.items())),
        }

    @classmethod
    def from_dict(cls, section) -> "AdamOptimizer":
        return cls(
            learning_rate=float(section["learning_rate"]),
            betas=tuple(section.get("betas", ADAM_BETAS)),
            eps=float(section.get("eps", ADAM_EPS)),
            first={name: np.array(value, dtype=float) for name, value in section.get("first", {}).items()},
            second={name: np.array(value, dtype=float) for name, value in section.get("second", {}).items()},
            steps={name: int(value) for name, value in section.get("steps", {}).items()},
        )
