"""
Configuration module for experiments and benchmark sweeps.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from em_trainer import TrainConfig
from shared.config import (
    BaseConfig,
    from_dict,
    load_json_config,
    require_choice,
    require_nonnegative,
    require_positive,
    require_range,
    to_dict,
)
from shared.constants import BENCHMARK_METHODS, CONFIG_SCHEMA_VERSION, DEFAULT_MISSING_RATES, ERROR_MESSAGES
from shared.exceptions import ConfigError
from synthetic_bench import InstanceSpec

DEFAULT_SEEDS = 5
DEFAULT_CHECKPOINT_TTL_HOURS = 48
EXPERIMENT_KEYS = {"schema_version", "instance", "train", "sweep", "output_dir", "threads", "test_fraction"}


@dataclass
class SweepConfig:
    """
    Benchmark grid.

    Attributes:
        missing_rates: target missing rates
        seeds: number of random instances per grid cell (seeds base, base + 1, ...)
        n_per_intervention: optional sample-size axis
        max_parents: optional mechanism-sparsity axis
        methods: any of em, complete_data, complete_case, mean_impute
        checkpoint_ttl_hours: resume window of the sweep checkpoint (0 never expires)
    """

    missing_rates: List[float] = field(default_factory=lambda: list(DEFAULT_MISSING_RATES))
    seeds: int = DEFAULT_SEEDS
    n_per_intervention: Optional[List[int]] = None
    max_parents: Optional[List[int]] = None
    methods: List[str] = field(default_factory=lambda: list(BENCHMARK_METHODS))
    checkpoint_ttl_hours: int = DEFAULT_CHECKPOINT_TTL_HOURS

    def __post_init__(self):
        if not self.missing_rates:
            raise ConfigError("at least one missing rate is required", field="sweep.missing_rates")
        for rate in self.missing_rates:
            require_range("sweep.missing_rates", rate, 0.0, 1.0)
        require_positive("sweep.seeds", self.seeds)
        for value in self.n_per_intervention or []:
            require_positive("sweep.n_per_intervention", value)
        for value in self.max_parents or []:
            require_nonnegative("sweep.max_parents", value)
        if not self.methods:
            raise ConfigError("at least one method is required", field="sweep.methods")
        for method in self.methods:
            require_choice("sweep.methods", method, BENCHMARK_METHODS)
        require_nonnegative("sweep.checkpoint_ttl_hours", self.checkpoint_ttl_hours)


@dataclass
class ExperimentConfig(BaseConfig):
    """One experiment file: instance, training, optional sweep and output location."""

    instance: InstanceSpec = field(default_factory=InstanceSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: Optional[SweepConfig] = None
    test_fraction: Optional[float] = None
    # output_directory, threads inherited from BaseConfig

    def __post_init__(self):
        super().__post_init__()
        if self.test_fraction is not None:
            require_range("test_fraction", self.test_fraction, 0.0, 1.0)
            require_positive("test_fraction", self.test_fraction)

    def to_json(self) -> Dict[str, Any]:
        data = {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "instance": to_dict(self.instance),
            "train": to_dict(self.train),
            "output_dir": self.output_directory,
        }
        if self.sweep is not None:
            data["sweep"] = to_dict(self.sweep)
        if self.test_fraction is not None:
            data["test_fraction"] = self.test_fraction
        return data


def experiment_from_dict(data: Dict[str, Any], output_dir: Optional[str] = None, threads: Optional[int] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """
    Build an ExperimentConfig from parsed JSON plus command-line overrides.

    Args:
        data: Parsed experiment file
        output_dir: ``--out`` override
        threads: ``--threads`` override (also applied to training)
        seed: ``--seed`` override for both the instance and training

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: unknown keys or invalid values, naming the field
    """
    unknown = sorted(set(data) - EXPERIMENT_KEYS)
    if unknown:
        raise ConfigError(ERROR_MESSAGES["unknown_keys"].format(section="<root>", keys=", ".join(unknown)))
    instance = dict(data.get("instance") or {})
    train = dict(data.get("train") or {})
    if seed is not None:
        instance["seed"] = seed
        train["seed"] = seed
    if threads is not None:
        train["threads"] = threads
    kwargs: Dict[str, Any] = {
        "instance": from_dict(InstanceSpec, instance, "instance"),
        "train": from_dict(TrainConfig, train, "train"),
        "sweep": from_dict(SweepConfig, data["sweep"], "sweep") if data.get("sweep") is not None else None,
        "test_fraction": data.get("test_fraction"),
    }
    out = output_dir or data.get("output_dir")
    if out:
        kwargs["output_directory"] = out
    if threads is not None:
        kwargs["threads"] = threads
    elif data.get("threads") is not None:
        kwargs["threads"] = data["threads"]
    return ExperimentConfig(**kwargs)


def load_experiment(path: Optional[str], output_dir: Optional[str] = None, threads: Optional[int] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Load an experiment file (None means all defaults)."""
    data = load_json_config(path) if path else {}
    return experiment_from_dict(data, output_dir=output_dir, threads=threads, seed=seed)
