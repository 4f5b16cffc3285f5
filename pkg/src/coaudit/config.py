"""Run configuration merged from flags, a config file, the environment and defaults.

A config file holds one ``key = value`` per line; blank lines and lines
starting with ``#`` are ignored. Environment variables are named
``COAUDIT_<KEY>`` in upper case. The API credential itself is never part of
the configuration, only the name of the variable holding it.
"""

import logging
import os
from collections.abc import Callable
from collections.abc import Mapping
from dataclasses import dataclass
from dataclasses import fields
from pathlib import Path
from typing import Any
from typing import Literal

from coaudit.auditing.gateway import DEFAULT_API_KEY_ENV
from coaudit.auditing.gateway import DEFAULT_ENDPOINT
from coaudit.auditing.gateway import DEFAULT_MODEL_TAG
from coaudit.errors import ConfigError
from coaudit.scoping.ccl import DEFAULT_BUDGET

logger = logging.getLogger(__name__)

ENV_PREFIX = "COAUDIT_"


@dataclass(frozen=True)
class RunConfig:
    """Every setting of a pipeline run.

    Attributes:
        project_root: Root directory of the Solidity project.
        entry: Main contract file, relative to the project root.
        remappings: Remappings file (``prefix=dir`` per line).
        contract: Contract to audit; the last one in the entry file when unset.
        budget: Token budget per CCL.
        include_state_vars: Prepend state variable declarations to CCLs.
        mode: Prompt mode, CAQ or CWE.
        catalog: Vulnerability catalog CSV; the packaged one when unset.
        taxonomy: Taxonomy JSON; the packaged one when unset.
        backend: live, replay or record.
        cassette: Cassette file for replay and record.
        strict_replay: Fail on a replay miss instead of calling the backend.
        endpoint: Chat-completion URL of the live backend.
        model_tag: Model name sent to the backend.
        temperature: Sampling temperature.
        max_tokens: Completion token limit.
        parallelism: Maximum requests in flight.
        api_key_env: Environment variable holding the API key.
        report_format: csv, markdown or json.
        output: Directory receiving every stage artifact.
        ground_truth: Ground-truth CSV for evaluation.
        run_label: Name of this run in evaluation outputs.
        count_not_sure: Count 'Not sure' answers as detections.
        comparisons: Pairs of run labels compared in the stats report.
        annotations: Annotation records CSV.
    """

    project_root: Path | None = None
    entry: str | None = None
    remappings: Path | None = None
    contract: str | None = None
    budget: int = DEFAULT_BUDGET
    include_state_vars: bool = False
    mode: Literal["CAQ", "CWE"] = "CAQ"
    catalog: Path | None = None
    taxonomy: Path | None = None
    backend: Literal["live", "replay", "record"] = "replay"
    cassette: Path | None = None
    strict_replay: bool = True
    endpoint: str = DEFAULT_ENDPOINT
    model_tag: str = DEFAULT_MODEL_TAG
    temperature: float = 0.0
    max_tokens: int = 8000
    parallelism: int = 1
    api_key_env: str = DEFAULT_API_KEY_ENV
    report_format: Literal["csv", "markdown", "json"] = "csv"
    output: Path = Path("coaudit-out")
    ground_truth: Path | None = None
    run_label: str = "run"
    count_not_sure: bool = False
    comparisons: tuple[tuple[str, str], ...] = ()
    annotations: Path | None = None

    def __post_init__(self) -> None:
        """Check value ranges and choices."""
        if self.budget <= 0:
            raise ConfigError(f"budget must be positive, got {self.budget}")
        if self.mode not in ("CAQ", "CWE"):
            raise ConfigError(f"mode must be CAQ or CWE, got {self.mode!r}")
        if self.backend not in ("live", "replay", "record"):
            raise ConfigError(f"backend must be live, replay or record, got {self.backend!r}")
        if self.report_format not in ("csv", "markdown", "json"):
            raise ConfigError(
                f"report_format must be csv, markdown or json, got {self.report_format!r}"
            )
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be at least 1, got {self.parallelism}")
        if self.max_tokens < 1:
            raise ConfigError(f"max_tokens must be positive, got {self.max_tokens}")
        if self.temperature < 0:
            raise ConfigError(f"temperature cannot be negative, got {self.temperature}")
        if not self.run_label or "/" in self.run_label:
            raise ConfigError(f"run_label must be a non-empty file name, got {self.run_label!r}")


def _boolean(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _comparisons(value: str) -> tuple[tuple[str, str], ...]:
    pairs = []
    for item in value.replace(";", ",").split(","):
        if not item.strip():
            continue
        left, sep, right = item.partition(":")
        if not sep or not left.strip() or not right.strip():
            raise ValueError(f"comparison {item.strip()!r} is not of the form A:B")
        pairs.append((left.strip(), right.strip()))
    return tuple(pairs)


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    return lambda value: convert(value) if value.strip() else None


_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "project_root": _optional(Path),
    "entry": _optional(str.strip),
    "remappings": _optional(Path),
    "contract": _optional(str.strip),
    "budget": int,
    "include_state_vars": _boolean,
    "mode": lambda value: value.strip().upper(),
    "catalog": _optional(Path),
    "taxonomy": _optional(Path),
    "backend": lambda value: value.strip().lower(),
    "cassette": _optional(Path),
    "strict_replay": _boolean,
    "endpoint": str.strip,
    "model_tag": str.strip,
    "temperature": float,
    "max_tokens": int,
    "parallelism": int,
    "api_key_env": str.strip,
    "report_format": lambda value: value.strip().lower(),
    "output": Path,
    "ground_truth": _optional(Path),
    "run_label": str.strip,
    "count_not_sure": _boolean,
    "comparisons": _comparisons,
    "annotations": _optional(Path),
}
CONFIG_KEYS = tuple(field.name for field in fields(RunConfig))


def _convert(key: str, value: Any, origin: str) -> Any:
    if not isinstance(value, str):
        return value
    try:
        return _CONVERTERS[key](value)
    except ValueError as err:
        raise ConfigError(f"Invalid value for {key} in {origin}: {err}") from err


def read_config_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines.

    Raises:
        ConfigError: If the file is missing, a line has no '=' or a key is unknown.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file {path} does not exist")
    values = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"Line {number} of {path} is not of the form key = value")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"Unknown config key {key!r} on line {number} of {path}")
        values[key] = value.strip()
    return values


def environment_values(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    """Collect ``COAUDIT_<KEY>`` variables for known keys."""
    environ = os.environ if environ is None else environ
    return {
        key: environ[f"{ENV_PREFIX}{key.upper()}"]
        for key in CONFIG_KEYS
        if f"{ENV_PREFIX}{key.upper()}" in environ
    }


def load_config(
    flags: Mapping[str, Any] | None = None,
    config_file: str | Path | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Merge configuration sources, flags taking precedence.

    Args:
        flags: Values given on the command line; None values are ignored.
        config_file: Optional ``key = value`` file.
        environ: Environment; ``os.environ`` when omitted.

    Returns:
        The validated configuration.

    Raises:
        ConfigError: If a key is unknown or a value is invalid.
    """
    merged: dict[str, Any] = {}
    for key, value in environment_values(environ).items():
        merged[key] = _convert(key, value, f"{ENV_PREFIX}{key.upper()}")
    if config_file is not None:
        for key, value in read_config_file(config_file).items():
            merged[key] = _convert(key, value, str(config_file))
    for key, value in (flags or {}).items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"Unknown config key {key!r}")
        merged[key] = _convert(key, value, "the command line")
    config = RunConfig(**merged)
    logger.debug("Configuration keys set: %s", ", ".join(sorted(merged)) or "none")
    return config

