"""
Causal mechanisms F(X): a masked linear matrix and a masked one-hidden-layer network.

Both models act on row batches ``x`` of shape (n, K) together with a K x K
dependency mask ``m`` whose column k gates the inputs of output k. Every
derivative is written out by hand:

* ``vjp``           gradient of sum(G * F(x)) w.r.t. parameters and mask
* ``vjp_input``     rows of J(x)^T g
* ``jvp``           rows of J(x) v
* ``bilinear_grad`` gradient of sum_n u_n^T J(x_n) v_n w.r.t. parameters and mask
"""

import dataclasses
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from graph_model import spectral_norm
from shared.config import require_choice, require_range
from shared.constants import ACTIVATIONS, DEFAULT_LIPSCHITZ

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


class SemModel(ABC):
    """Common interface of the mechanisms."""

    kind: str = ""
    lipschitz_target: float

    @property
    @abstractmethod
    def k(self) -> int:
        """Node count."""

    @property
    @abstractmethod
    def layer_names(self) -> Tuple[str, ...]:
        """Weight matrices that carry the Lipschitz budget."""

    @property
    def contractive(self) -> bool:
        return True

    @abstractmethod
    def params(self) -> Params:
        """Trainable tensors by name."""

    def with_params(self, params: Params) -> "SemModel":
        return dataclasses.replace(self, **params)

    @abstractmethod
    def forward(self, x: np.ndarray, m: np.ndarray) -> np.ndarray:
        """F(x) for every row of ``x``."""

    @abstractmethod
    def vjp(self, x: np.ndarray, m: np.ndarray, g: np.ndarray) -> Tuple[Params, np.ndarray]:
        """Parameter and mask gradients of sum(g * F(x))."""

    @abstractmethod
    def vjp_input(self, x: np.ndarray, m: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Rows of J(x)^T g."""

    @abstractmethod
    def jvp(self, x: np.ndarray, m: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Rows of J(x) v."""

    @abstractmethod
    def bilinear_grad(self, x: np.ndarray, m: np.ndarray, u: np.ndarray, v: np.ndarray) -> Tuple[Params, np.ndarray]:
        """Parameter and mask gradients of sum_n u_n^T J(x_n) v_n."""

    def lipschitz_bound(self) -> float:
        """Product of the layer spectral norms; a Lipschitz bound for F when all mask columns agree."""
        bound = 1.0
        for name in self.layer_names:
            bound *= spectral_norm(getattr(self, name))
        return bound


@dataclass(frozen=True, eq=False)
class LinearSem(SemModel):
    """X = (M * B)^T X + eps; ``b[j, k]`` is the coefficient of X_j in the equation of X_k."""

    b: np.ndarray
    lipschitz_target: float = DEFAULT_LIPSCHITZ
    is_contractive: bool = True

    kind = "linear"

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"B must be square, got shape {b.shape}")
        if np.any(np.diag(b) != 0.0):
            raise ValueError("B must have a zero diagonal")
        if self.is_contractive:
            require_range("lipschitz_target", self.lipschitz_target, 0.0, 1.0, closed_high=True)
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.b.shape[0]

    @property
    def layer_names(self) -> Tuple[str, ...]:
        return ("b",)

    @property
    def contractive(self) -> bool:
        return self.is_contractive

    @classmethod
    def initialize(cls, k: int, rng: np.random.Generator, scale: float = 0.1, lipschitz_target: float = DEFAULT_LIPSCHITZ) -> "LinearSem":
        b = scale * rng.standard_normal((k, k))
        np.fill_diagonal(b, 0.0)
        return cls(b, lipschitz_target=lipschitz_target)

    def params(self) -> Params:
        return {"b": self.b}

    def masked(self, m: np.ndarray) -> np.ndarray:
        return m * self.b

    def forward(self, x, m):
        return x @ self.masked(m)

    def _split(self, grad_c: np.ndarray, m: np.ndarray) -> Tuple[Params, np.ndarray]:
        grad_b = m * grad_c
        np.fill_diagonal(grad_b, 0.0)
        return {"b": grad_b}, self.b * grad_c

    def vjp(self, x, m, g):
        return self._split(x.T @ g, m)

    def vjp_input(self, x, m, g):
        return g @ self.masked(m).T

    def jvp(self, x, m, v):
        return v @ self.masked(m)

    def bilinear_grad(self, x, m, u, v):
        return self._split(v.T @ u, m)


def _tanh(p):
    t = np.tanh(p)
    return t, 1.0 - t * t, -2.0 * t * (1.0 - t * t)


def _identity(p):
    return p, np.ones_like(p), np.zeros_like(p)


# activation -> (value, first derivative, second derivative)
_ACTIVATIONS = {"tanh": _tanh, "identity": _identity}


@dataclass(frozen=True, eq=False)
class MlpSem(SemModel):
    """One shared hidden layer applied per output to the masked input M[:, k] * x.

    F_k(x) = sum_h w2[h, k] act(sum_j w1[j, h] M[j, k] x_j + b1[h]) + b2[k]

    Attributes:
        w1: K x H input-to-hidden weights
        b1: H hidden biases
        w2: H x K hidden-to-output weights
        b2: K output biases
        activation: 'tanh' or 'identity'
        lipschitz_target: end-to-end Lipschitz budget in (0, 1]
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "tanh"
    lipschitz_target: float = DEFAULT_LIPSCHITZ

    kind = "mlp"

    def __post_init__(self):
        w1 = np.array(self.w1, dtype=float)
        b1 = np.array(self.b1, dtype=float)
        w2 = np.array(self.w2, dtype=float)
        b2 = np.array(self.b2, dtype=float)
        if w1.ndim != 2 or w2.shape != (w1.shape[1], w1.shape[0]) or b1.shape != (w1.shape[1],) or b2.shape != (w1.shape[0],):
            raise ValueError(f"inconsistent layer shapes: w1 {w1.shape}, b1 {b1.shape}, w2 {w2.shape}, b2 {b2.shape}")
        require_choice("activation", self.activation, ACTIVATIONS)
        require_range("lipschitz_target", self.lipschitz_target, 0.0, 1.0, closed_high=True)
        for name, value in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            object.__setattr__(self, name, value)

    @property
    def k(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def layer_names(self) -> Tuple[str, ...]:
        return ("w1", "w2")

    @classmethod
    def initialize(
        cls,
        k: int,
        hidden: int,
        rng: np.random.Generator,
        scale: float = 0.1,
        activation: str = "tanh",
        lipschitz_target: float = DEFAULT_LIPSCHITZ,
    ) -> "MlpSem":
        return cls(
            w1=scale * rng.standard_normal((k, hidden)),
            b1=np.zeros(hidden),
            w2=scale * rng.standard_normal((hidden, k)),
            b2=np.zeros(k),
            activation=activation,
            lipschitz_target=lipschitz_target,
        )

    def params(self) -> Params:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def _hidden_state(self, x, m):
        p = np.einsum("nj,jh,jk->nhk", x, self.w1, m, optimize=True) + self.b1[None, :, None]
        return _ACTIVATIONS[self.activation](p)

    def _masked_directions(self, v, m):
        return np.einsum("nj,jh,jk->nhk", v, self.w1, m, optimize=True)

    def forward(self, x, m):
        t, _, _ = self._hidden_state(x, m)
        return np.einsum("nhk,hk->nk", t, self.w2) + self.b2

    def vjp(self, x, m, g):
        t, dt, _ = self._hidden_state(x, m)
        delta = g[:, None, :] * self.w2[None] * dt
        grads = {
            "w1": np.einsum("nhk,jk,nj->jh", delta, m, x, optimize=True),
            "b1": delta.sum(axis=(0, 2)),
            "w2": np.einsum("nhk,nk->hk", t, g),
            "b2": g.sum(axis=0),
        }
        grad_m = np.einsum("nhk,jh,nj->jk", delta, self.w1, x, optimize=True)
        return grads, grad_m

    def vjp_input(self, x, m, g):
        _, dt, _ = self._hidden_state(x, m)
        delta = g[:, None, :] * self.w2[None] * dt
        return np.einsum("nhk,jh,jk->nj", delta, self.w1, m, optimize=True)

    def jvp(self, x, m, v):
        _, dt, _ = self._hidden_state(x, m)
        q = self._masked_directions(v, m)
        return np.einsum("hk,nhk->nk", self.w2, dt * q)

    def bilinear_grad(self, x, m, u, v):
        _, dt, ddt = self._hidden_state(x, m)
        q = self._masked_directions(v, m)
        uw = u[:, None, :] * self.w2[None]
        gq = uw * dt  # d/dQ
        e = uw * ddt * q  # d/dP
        grads = {
            "w1": np.einsum("nhk,jk,nj->jh", e, m, x, optimize=True) + np.einsum("nhk,jk,nj->jh", gq, m, v, optimize=True),
            "b1": e.sum(axis=(0, 2)),
            "w2": np.einsum("nhk,nhk->hk", u[:, None, :] * dt, q),
            "b2": np.zeros_like(self.b2),
        }
        grad_m = np.einsum("nhk,jh,nj->jk", e, self.w1, x, optimize=True) + np.einsum("nhk,jh,nj->jk", gq, self.w1, v, optimize=True)
        return grads, grad_m


def spectral_normalize(model: SemModel, power_iters: int = 500, rng: Optional[np.random.Generator] = None) -> SemModel:
    """Rescale each weight layer by min(1, c / sigma) with c = lipschitz_target ** (1 / L).

    Models flagged non-contractive are returned unchanged.

    The product of layer norms bounds the Lipschitz constant of F only when
    every output sees the same mask column. Elementwise masking can raise the
    spectral norm above that product; what always holds for a mask in [0, 1]
    is |J|_2 <= |J|_F <= |w1|_2 |w2|_F for the network and
    |B * M|_2 <= |B|_F for the linear model.
    """
    if power_iters < 1:
        raise ValueError(f"power_iters must be >= 1 (got {power_iters})")
    if not model.contractive:
        return model
    budget = model.lipschitz_target ** (1.0 / len(model.layer_names))
    updates = {}
    for name in model.layer_names:
        weights = getattr(model, name)
        sigma = spectral_norm(weights, max_iter=power_iters, rng=rng)
        if sigma > budget:
            updates[name] = weights * (budget / sigma)
    if not updates:
        return model
    logger.debug(f"Rescaled layers {sorted(updates)} to per-layer budget {budget:.6f}")
    return dataclasses.replace(model, **updates)
