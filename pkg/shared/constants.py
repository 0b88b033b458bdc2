"""
Constants and default values for the cyclic causal discovery toolkit.
"""

TOOL_NAME = "cyclic-em-discovery"
TOOL_VERSION = "1.0.0"

# Document formats
CHECKPOINT_FORMAT = "cyclic-em-checkpoint"
CHECKPOINT_VERSION = 1
CONFIG_SCHEMA_VERSION = 1

# Missing marker in dataset files (NaN in memory)
MISSING_TOKEN = "?"

# Environment variables
THREADS_ENV_VAR = "CYCLIC_EM_THREADS"
OUTPUT_ENV_VAR = "CYCLIC_EM_OUTPUT"

# Default configuration values
DEFAULT_THREADS = 1
DEFAULT_OUTPUT_DIRECTORY = "output"

# Synthetic protocol defaults
DEFAULT_NODES = 10
DEFAULT_WEIGHT_BAND = (0.25, 0.6)
DEFAULT_LIPSCHITZ = 0.9
DEFAULT_NOISE_SIGMA = 0.25
DEFAULT_N_PER_INTERVENTION = 500
DEFAULT_MAX_PARENTS = 3
DEFAULT_MISSING_RATES = [0.1, 0.2, 0.3, 0.4, 0.5]

# Training defaults
DEFAULT_EPOCHS = 100
DEFAULT_BATCH_SIZE = 256
DEFAULT_LEARNING_RATE = 1e-2
DEFAULT_LAMBDA = 1e-2
DEFAULT_HIDDEN = 16
DEFAULT_EDGE_THRESHOLD = 0.1
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Numerical tolerances
FIXED_POINT_TOL = 1e-8
FIXED_POINT_MAX_ITER = 1000
SIMULATION_TOL = 1e-10
ACYCLIC_TOL = 1e-6
EXACT_LOGDET_MAX_NODES = 64

# Supported choices
SEM_FAMILIES = ["linear", "tanh"]
MODEL_KINDS = ["linear", "mlp"]
ACTIVATIONS = ["tanh", "identity"]
ESTEP_MODES = ["rejection", "gaussian-exact"]
LOGDET_MODES = ["auto", "exact", "stochastic"]
MECHANISMS = ["mnar", "mar", "mcar"]
BENCHMARK_METHODS = ["em", "complete_data", "complete_case", "mean_impute"]
FALLBACKS = ["best-weight", "resample-proposal"]

# Process exit codes
EXIT_CODES = {
    "success": 0,
    "unexpected": 1,
    "config": 2,
    "data": 3,
    "training": 4,
}

# Error messages
ERROR_MESSAGES = {
    "invalid_choice": "Invalid {field} '{value}'. Supported: {supported}",
    "not_positive": "{field} must be > 0 (got {value})",
    "negative": "{field} must be >= 0 (got {value})",
    "out_of_range": "{field} must lie in {interval} (got {value})",
    "unknown_keys": "Unknown key(s) in section '{section}': {keys}",
    "missing_section": "Config is missing required section '{section}'",
    "schema_version": "Unsupported schema_version {found}; expected {expected}",
    "dimension_mismatch": "Dimension mismatch: {left} vs {right}",
    "ragged_row": "Row {row}: expected {expected} columns, found {found}",
    "bad_header": "Malformed header: expected {expected}, found {found}",
    "bad_cell": "Row {row}, column '{column}': cannot parse '{value}'",
    "missing_flag_mismatch": "Row {row}, column '{column}': value marker disagrees with r = {r}",
    "unprotected_intervention": "Row {row}, node {node}: intervened coordinate is marked missing",
    "gaussian_exact_requires": "estep_mode 'gaussian-exact' requires a linear model and an ignorable mechanism",
    "exact_logdet_requires": "logdet_mode 'exact' is only available for linear models",
}

# Logging configuration
LOGGING_CONFIG = {
    "level": "WARNING",
    "verbose_level": "INFO",
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
}

# File naming patterns
FILE_PATTERNS = {
    "dataset": "dataset.csv",
    "train_split": "dataset_train.csv",
    "test_split": "dataset_test.csv",
    "truth": "truth.json",
    "checkpoint": "checkpoint.json",
    "history": "history.csv",
    "acceptance": "acceptance.csv",
    "diagnostics": "logdet_diagnostics.csv",
    "metrics": "metrics.json",
    "sweep": "benchmark.csv",
    "sweep_checkpoint": "benchmark_checkpoint.json",
    "manifest": "{command}_manifest.json",
}
