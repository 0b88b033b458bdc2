"""
Fit state: the parameter bundle (theta, phi), optimizer moments and history.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from missing_mechanism import MnarModel, fit_complete_cases, marginal_fallback
from sem_engine import (
    GumbelMask,
    LinearSem,
    MlpSem,
    SemModel,
    mask_from_dict,
    model_from_sections,
    model_sections,
    read_document,
    spectral_normalize,
    write_document,
)
from shared.config import from_dict, to_dict
from shared.exceptions import DataError, InitializationError
from target_likelihood import NoiseModel

from .config import TrainConfig
from .optimizer import AdamOptimizer, Tensors

logger = logging.getLogger(__name__)

MODEL_PREFIX = "model."
MASK_LOGITS = "mask.logits"
LOG_VARIANCES = "noise.log_variances"
MNAR_W = "mnar.w"
MNAR_Z = "mnar.z"


@dataclass
class FitState:
    """
    Everything EM carries between iterations.

    Attributes:
        model: mechanism F (theta)
        mask: edge-mask distribution (theta)
        noise: noise variances (theta when learned)
        mnar: missingness mechanism (phi)
        optimizer: Adam moments for theta and phi tensors
        history: one record per completed epoch
        step: global minibatch counter; even steps update theta, odd steps phi
        epoch: epochs completed
    """

    model: SemModel
    mask: GumbelMask
    noise: NoiseModel
    mnar: MnarModel
    optimizer: AdamOptimizer
    history: List[Dict[str, Any]] = field(default_factory=list)
    step: int = 0
    epoch: int = 0

    @property
    def k(self) -> int:
        return self.model.k

    def theta(self) -> Tensors:
        params = {MODEL_PREFIX + name: value for name, value in self.model.params().items()}
        params[MASK_LOGITS] = self.mask.logits
        if self.noise.learnable:
            params[LOG_VARIANCES] = self.noise.log_variances
        return params

    def phi(self) -> Tensors:
        return {MNAR_W: self.mnar.w, MNAR_Z: self.mnar.z}

    def with_theta(self, params: Tensors) -> "FitState":
        """Install new theta values (no projection)."""
        model_params = {name[len(MODEL_PREFIX) :]: value for name, value in params.items() if name.startswith(MODEL_PREFIX)}
        self.model = self.model.with_params(model_params)
        logits = params[MASK_LOGITS].copy()
        np.fill_diagonal(logits, 0.0)
        self.mask = self.mask.with_logits(logits)
        if LOG_VARIANCES in params:
            self.noise = self.noise.with_log_variances(params[LOG_VARIANCES])
        return self

    def with_phi(self, params: Tensors) -> "FitState":
        self.mnar = self.mnar.with_params(params[MNAR_W], params[MNAR_Z])
        return self

    def parameter_vector(self) -> np.ndarray:
        """All theta and phi values flattened in name order (for change tracking)."""
        params = {**self.theta(), **self.phi()}
        return np.concatenate([np.ravel(params[name]) for name in sorted(params)])


def initial_model(k: int, cfg: TrainConfig, rng: np.random.Generator) -> SemModel:
    if cfg.model == "linear":
        model: SemModel = LinearSem.initialize(k, rng, scale=cfg.init_scale, lipschitz_target=cfg.lipschitz_target)
    else:
        model = MlpSem.initialize(
            k, cfg.hidden, rng, scale=cfg.init_scale, activation=cfg.activation, lipschitz_target=cfg.lipschitz_target
        )
    return spectral_normalize(model, power_iters=cfg.power_iters)


def initial_mechanism(data, cfg: TrainConfig) -> MnarModel:
    """Complete-case fit of phi, falling back to marginal rates."""
    try:
        return fit_complete_cases(data, max_parents=cfg.max_parents, lambda2=cfg.lambda2)
    except InitializationError as e:
        logger.warning(f"{e}; initializing the mechanism from marginal missing rates")
        return marginal_fallback(data)


def initialize_state(data, cfg: TrainConfig) -> FitState:
    """
    Fresh theta (zero logits, small random weights, projected) and a complete-case phi.

    Raises:
        InitializationError: the dataset has no records
    """
    if data.n == 0:
        raise InitializationError("dataset has no records")
    rng = np.random.default_rng([cfg.seed, 0xC0FFEE])
    model = initial_model(data.k, cfg, rng)
    return FitState(
        model=model,
        mask=GumbelMask.zeros(data.k, temperature=cfg.temperature, hard=cfg.hard),
        noise=NoiseModel.isotropic(data.k, cfg.noise_sigma, learnable=cfg.learn_variances),
        mnar=initial_mechanism(data, cfg),
        optimizer=AdamOptimizer(learning_rate=cfg.learning_rate),
    )


def state_sections(state: FitState, cfg: Optional[TrainConfig] = None) -> Dict[str, Any]:
    """Checkpoint sections for a fit state."""
    sections = model_sections(state.model, state.mask)
    sections.update(
        {
            "noise": state.noise.to_dict(),
            "mnar": state.mnar.to_dict(),
            "optimizer": state.optimizer.to_dict(),
            "training": {"step": state.step, "epoch": state.epoch},
        }
    )
    if cfg is not None:
        sections["train"] = to_dict(cfg)
    return sections


def state_from_document(document: Dict[str, Any]) -> FitState:
    for key in ("mask", "noise", "mnar"):
        if key not in document:
            raise DataError(f"checkpoint is missing section '{key}'")
    training = document.get("training", {})
    optimizer = document.get("optimizer")
    return FitState(
        model=model_from_sections(document),
        mask=mask_from_dict(document["mask"]),
        noise=NoiseModel.from_dict(document["noise"]),
        mnar=MnarModel.from_dict(document["mnar"]),
        optimizer=AdamOptimizer.from_dict(optimizer) if optimizer else AdamOptimizer(learning_rate=0.0),
        step=int(training.get("step", 0)),
        epoch=int(training.get("epoch", 0)),
    )


def save_state(state: FitState, path: str, cfg: Optional[TrainConfig] = None, extra: Optional[Dict[str, Any]] = None) -> str:
    """Write a checkpoint document; ``extra`` adds sections such as extracted graphs."""
    sections = state_sections(state, cfg)
    sections.update(extra or {})
    return write_document(path, sections)


def load_state(path: str) -> FitState:
    return state_from_document(read_document(path))


def train_config_from_document(document: Dict[str, Any]) -> Optional[TrainConfig]:
    section = document.get("train")
    return from_dict(TrainConfig, section, "train") if section is not None else None
