import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Type, TypeVar

from .constants import (
    CONFIG_SCHEMA_VERSION,
    DEFAULT_OUTPUT_DIRECTORY,
    DEFAULT_THREADS,
    ERROR_MESSAGES,
    OUTPUT_ENV_VAR,
    THREADS_ENV_VAR,
)
from .exceptions import ConfigError

T = TypeVar("T")


def default_threads() -> int:
    """Worker count from the environment, falling back to the built-in default."""
    raw = os.getenv(THREADS_ENV_VAR)
    if not raw:
        return DEFAULT_THREADS
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, found '{raw}'", field=THREADS_ENV_VAR)
    if value < 1:
        raise ConfigError(ERROR_MESSAGES["not_positive"].format(field=THREADS_ENV_VAR, value=value))
    return value


def default_output_directory() -> str:
    return os.getenv(OUTPUT_ENV_VAR) or DEFAULT_OUTPUT_DIRECTORY


@dataclass
class BaseConfig:
    """Base configuration shared by every command."""

    output_directory: str = field(default_factory=default_output_directory)
    threads: int = field(default_factory=default_threads)

    def __post_init__(self):
        if not self.output_directory:
            raise ConfigError("Output directory is required", field="output_directory")
        require_positive("threads", self.threads)

    def ensure_output_directory(self) -> str:
        os.makedirs(self.output_directory, exist_ok=True)
        return self.output_directory


def require_choice(name: str, value: Any, supported: Iterable[Any]) -> None:
    supported = list(supported)
    if value not in supported:
        raise ConfigError(ERROR_MESSAGES["invalid_choice"].format(field=name, value=value, supported=supported), field=name)


def require_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ConfigError(ERROR_MESSAGES["not_positive"].format(field=name, value=value), field=name)


def require_nonnegative(name: str, value: float) -> None:
    if not value >= 0:
        raise ConfigError(ERROR_MESSAGES["negative"].format(field=name, value=value), field=name)


def require_range(name: str, value: float, low: float, high: float, closed_high: bool = False) -> None:
    ok = low <= value <= high if closed_high else low <= value < high
    if not ok:
        interval = f"[{low}, {high}]" if closed_high else f"[{low}, {high})"
        raise ConfigError(ERROR_MESSAGES["out_of_range"].format(field=name, interval=interval, value=value), field=name)


def from_dict(cls: Type[T], data: Optional[Dict[str, Any]], section: str) -> T:
    """Build a config dataclass from a mapping, rejecting unknown keys.

    Args:
        cls: Target dataclass type
        data: Parsed JSON section (None means all defaults)
        section: Section name used in error messages

    Returns:
        Instance of ``cls``
    """
    data = dict(data or {})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(ERROR_MESSAGES["unknown_keys"].format(section=section, keys=", ".join(unknown)), field=section)
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(str(e), field=section)


def to_dict(config: Any) -> Dict[str, Any]:
    """Plain-JSON view of a config dataclass (tuples become lists)."""
    return json.loads(json.dumps(dataclasses.asdict(config), default=list))


def load_json_config(path: str) -> Dict[str, Any]:
    """Read a JSON experiment file and check its schema version."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", field="config")
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}", field="config")
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", field="config")
    version = data.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(
            ERROR_MESSAGES["schema_version"].format(found=version, expected=CONFIG_SCHEMA_VERSION),
            field="schema_version",
        )
    return data
