"""
Error taxonomy shared by every package. The CLI maps each family to an exit code.
"""

from typing import Optional


class CausalEMError(Exception):
    """Base class for all errors raised by this toolkit."""

    exit_key = "unexpected"


class ConfigError(CausalEMError, ValueError):
    """Invalid configuration value, optionally tied to a field."""

    exit_key = "config"

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DataError(CausalEMError, ValueError):
    """Dataset parse or validation failure."""

    exit_key = "data"

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(message)


class DimensionMismatchError(DataError):
    """Two inputs disagree on the node count K."""


class TrainingError(CausalEMError, RuntimeError):
    """Model fitting could not proceed."""

    exit_key = "training"


class InitializationError(TrainingError):
    """Parameter initialization failed (e.g. no usable complete cases)."""


class NonFiniteGradientError(TrainingError):
    """A gradient contained NaN or infinity."""


class FixedPointError(TrainingError):
    """Picard iteration did not converge; the map is likely not contractive."""


class SingularJacobianError(TrainingError):
    """The residual map id - D F is not invertible at this point."""


class PosteriorError(TrainingError):
    """The conditional precision is not positive definite."""


class ProposalMismatchError(TrainingError):
    """Every proposal draw had zero posterior weight."""
