"""
Configuration module for penalized EM training.
"""

from dataclasses import dataclass, field
from typing import Optional

from estep_imputation import RejectionConfig
from shared.config import (
    default_threads,
    from_dict,
    require_choice,
    require_nonnegative,
    require_positive,
    require_range,
)
from shared.constants import (
    ACTIVATIONS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_EDGE_THRESHOLD,
    DEFAULT_EPOCHS,
    DEFAULT_HIDDEN,
    DEFAULT_LAMBDA,
    DEFAULT_LEARNING_RATE,
    DEFAULT_LIPSCHITZ,
    DEFAULT_NOISE_SIGMA,
    ERROR_MESSAGES,
    ESTEP_MODES,
    LOGDET_MODES,
    MODEL_KINDS,
)
from shared.exceptions import ConfigError
from target_likelihood import LogDetEstimatorConfig

DEFAULT_INIT_SCALE = 0.1
DEFAULT_POWER_ITERS = 500
EARLY_STOP_TOL = 1e-5
EARLY_STOP_PATIENCE = 5


@dataclass
class TrainConfig:
    """
    EM training settings.

    Attributes:
        epochs: EM iterations (one E-step and one M-step pass each)
        batch_size: M-step minibatch size
        learning_rate: Adam step size
        lambda1: weight of the expected mask L1 norm
        lambda2: weight of the mechanism weight L1 norm
        lambda_dag: weight of the acyclicity penalty on the expected mask (0 disables)
        estep_mode: 'rejection' or 'gaussian-exact'
        logdet_mode: 'auto', 'exact' or 'stochastic'
        seed: base of every training random stream
        edge_threshold: strength cut-off for graph extraction
        model: 'linear' or 'mlp'
        hidden: hidden width of the network model
        activation: hidden activation of the network model
        init_scale: standard deviation of the initial weights
        temperature: initial Gumbel-softmax temperature
        temperature_final: anneal linearly to this value over the epochs (None keeps it fixed)
        hard: straight-through discretization of sampled masks
        learn_variances: add log noise variances to the trained parameters
        noise_sigma: initial (or fixed) noise standard deviation
        lipschitz_target: contractivity target of the model
        power_iters: power iterations of the spectral projection
        assume_ignorable: treat input missingness as MCAR/MAR (enables gaussian-exact on CSV input)
        early_stop: stop once the parameter change stays below tolerance
        early_stop_tol / early_stop_patience: early stop rule
        max_parents: cap on mechanism parents at initialization
        rejection: rejection sampler settings
        logdet: stochastic log-det estimator settings
        threads: E-step worker threads
    """

    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    lambda1: float = DEFAULT_LAMBDA
    lambda2: float = DEFAULT_LAMBDA
    lambda_dag: float = 0.0
    estep_mode: str = "rejection"
    logdet_mode: str = "auto"
    seed: int = 0
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD
    model: str = "linear"
    hidden: int = DEFAULT_HIDDEN
    activation: str = "tanh"
    init_scale: float = DEFAULT_INIT_SCALE
    temperature: float = 1.0
    temperature_final: Optional[float] = None
    hard: bool = False
    learn_variances: bool = False
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    lipschitz_target: float = DEFAULT_LIPSCHITZ
    power_iters: int = DEFAULT_POWER_ITERS
    assume_ignorable: bool = False
    early_stop: bool = False
    early_stop_tol: float = EARLY_STOP_TOL
    early_stop_patience: int = EARLY_STOP_PATIENCE
    max_parents: Optional[int] = None
    rejection: RejectionConfig = field(default_factory=RejectionConfig)
    logdet: LogDetEstimatorConfig = field(default_factory=LogDetEstimatorConfig)
    threads: int = field(default_factory=default_threads)

    def __post_init__(self):
        if isinstance(self.rejection, dict):
            self.rejection = from_dict(RejectionConfig, self.rejection, "train.rejection")
        if isinstance(self.logdet, dict):
            self.logdet = from_dict(LogDetEstimatorConfig, self.logdet, "train.logdet")
        require_positive("epochs", self.epochs)
        require_positive("batch_size", self.batch_size)
        require_positive("learning_rate", self.learning_rate)
        for name in ("lambda1", "lambda2", "lambda_dag", "seed"):
            require_nonnegative(name, getattr(self, name))
        require_positive("edge_threshold", self.edge_threshold)
        require_choice("estep_mode", self.estep_mode, ESTEP_MODES)
        require_choice("logdet_mode", self.logdet_mode, LOGDET_MODES)
        require_choice("model", self.model, MODEL_KINDS)
        require_choice("activation", self.activation, ACTIVATIONS)
        require_positive("hidden", self.hidden)
        require_positive("init_scale", self.init_scale)
        require_positive("temperature", self.temperature)
        if self.temperature_final is not None:
            require_positive("temperature_final", self.temperature_final)
        require_positive("noise_sigma", self.noise_sigma)
        require_range("lipschitz_target", self.lipschitz_target, 0.0, 1.0)
        require_positive("lipschitz_target", self.lipschitz_target)
        require_positive("power_iters", self.power_iters)
        require_positive("early_stop_tol", self.early_stop_tol)
        require_positive("early_stop_patience", self.early_stop_patience)
        if self.max_parents is not None:
            require_nonnegative("max_parents", self.max_parents)
        require_positive("threads", self.threads)
        if self.estep_mode == "gaussian-exact" and self.model != "linear":
            raise ConfigError(ERROR_MESSAGES["gaussian_exact_requires"], field="estep_mode")
        if self.logdet_mode == "exact" and self.model != "linear":
            raise ConfigError(ERROR_MESSAGES["exact_logdet_requires"], field="logdet_mode")

    def temperature_at(self, epoch: int) -> float:
        """Linear anneal from ``temperature`` to ``temperature_final``."""
        if self.temperature_final is None or self.epochs == 1:
            return self.temperature
        frac = min(epoch, self.epochs - 1) / (self.epochs - 1)
        return self.temperature + frac * (self.temperature_final - self.temperature)

    @property
    def dag_constrained(self) -> bool:
        return self.lambda_dag > 0.0
