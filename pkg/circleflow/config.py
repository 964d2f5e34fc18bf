"""Run configuration: defaults, YAML file layering and CLI overrides.

The effective configuration of a run is the YAML file at ``CONFIG_PATH``
(missing file means defaults) with command-line overrides applied last. It
is validated once into an immutable :class:`RunConfig`.
"""

from os import environ
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from circleflow.errors import InvalidInputError
from circleflow.yaml_store import load_yaml_file, write_yaml_file

CONFIG_PATH = Path(environ.get("CIRCLEFLOW_CONFIG", "circleflow.yaml"))


class RunConfig(BaseModel):
    """Validated settings shared by every command."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(256, ge=16, le=4096, description="Grid size (power of two)")
    seed: int = Field(0, ge=0, description="Seed for random ensembles and starts")
    gradient_tol: float = Field(1e-7, gt=0, description="Relative projected-gradient tolerance")
    constraint_tol: float = Field(1e-8, gt=0, description="Moment-constraint tolerance")
    stationarity_tol: float = Field(1e-8, gt=0, description="Flow stationarity tolerance")
    max_iter: int = Field(100_000, ge=1, description="Minimizer iteration cap")
    flow_dt0: float = Field(1e-3, gt=0, description="Initial flow time step")
    flow_dt_max: float = Field(1e-2, gt=0, description="Largest flow time step")
    t_end: float = Field(10.0, gt=0, description="Flow end time")
    ensemble_size: int = Field(200, ge=1, description="Random cases per inequality check")
    output_dir: Path = Field(Path("results"), description="Directory for result files")

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"n must be a power of two, got {value}")
        return value


def get_default_config() -> dict[str, Any]:
    """Return the default settings as a plain mapping."""
    return RunConfig().model_dump(mode="json")


def load_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Load the configuration file and apply non-None ``overrides``.

    Raises:
        YamlStoreError: If the file exists but is not a YAML mapping.
        InvalidInputError: If the merged settings fail validation.
    """
    cfg = load_yaml_file(path or CONFIG_PATH, {}, expected_type=dict)
    for key, value in get_default_config().items():
        cfg.setdefault(key, value)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    try:
        return RunConfig.model_validate(cfg)
    except ValidationError as err:
        raise InvalidInputError(f"Invalid configuration: {err}") from err


def save_config(config: RunConfig, path: Path) -> None:
    """Write the effective configuration atomically as YAML."""
    write_yaml_file(path, config.model_dump(mode="json"))
