"""
Run configuration for command-line experiments and its flat file format
"""

import math
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from lqlab.core.config import settings
from lqlab.core.exceptions import ConfigError
from lqlab.models.bounds import BoundKind
from lqlab.models.ensemble import EnsembleFamily, EnsembleSpec
from lqlab.models.index_set import IndexSetSpec


class Command(str, Enum):
    """Experiment subcommands."""

    SIMULATE = "simulate"
    BOUND = "bound"
    SCALING = "scaling"
    RIP = "rip"
    SECTIONS = "sections"
    DIAG = "diag"
    CALIBRATE = "calibrate"
    BERNSTEIN = "bernstein"
    WIDTH = "width"


SET_NAMES = ("sphere", "ball", "l1_ball", "sparse_sphere", "ellipsoid", "origin")


class RunConfig(BaseModel):
    """All parameters of one CLI run; unset optional fields are omitted on disk."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Command
    set: str = "sphere"
    family: EnsembleFamily = EnsembleFamily.GAUSSIAN
    d: int = Field(default=8, ge=1)
    s: Optional[int] = Field(default=None, ge=1, description="Sparsity")
    radius: float = Field(default=1.0, gt=0.0)
    axes: Optional[str] = Field(default=None, description="Comma-separated semiaxes")
    q: float = Field(default=2.0, ge=1.0)
    N: int = Field(default=256, ge=1)
    N_grid: Optional[str] = None
    trials: int = Field(default=100, ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)
    net_eps: Optional[float] = Field(default=None, gt=0.0)

    # bounds
    kind: BoundKind = BoundKind.MAIN
    gamma2: Optional[float] = Field(default=None, ge=0.0)
    diam: Optional[float] = Field(default=None, ge=0.0)
    u: float = Field(default=1.0, ge=1.0)
    C: float = Field(default=1.0, gt=0.0)
    level: float = Field(default=0.95, gt=0.0, lt=1.0)
    max_constant: float = Field(default=100.0, gt=0.0)
    thresholds: Optional[str] = None

    # applications
    p: float = Field(default=2.0, gt=1.0)
    R: str = Field(default="1", description="Radius or 'solve'")
    theta: float = Field(default=1.0, gt=0.0)
    window: float = Field(default=0.5, gt=0.0, lt=1.0)
    audit_vectors: int = Field(default=settings.AUDIT_POINTS, ge=1)
    mc_budget: int = Field(default=2000, ge=2)
    dims: str = "4,8,16,32"
    matrix: Optional[str] = None

    # execution
    out: Optional[str] = None
    threads: int = Field(default=settings.THREADS, ge=1)
    assert_checks: bool = False

    @field_validator("set")
    @classmethod
    def validate_set(cls, v: str) -> str:
        if v not in SET_NAMES:
            raise ValueError(f"set must be one of {', '.join(SET_NAMES)}")
        return v

    @field_validator("R")
    @classmethod
    def validate_radius(cls, v: str) -> str:
        if v == "solve":
            return v
        try:
            value = float(v)
        except ValueError:
            raise ValueError("R must be a positive number or 'solve'") from None
        if not value > 0 or math.isinf(value):
            raise ValueError("R must be a positive number or 'solve'")
        return v

    @property
    def ensemble(self) -> EnsembleSpec:
        return EnsembleSpec(family=self.family, dimension=self.d)

    def index_set(self) -> IndexSetSpec:
        """Index set named by ``set`` in dimension ``d``."""
        if self.set == "sphere":
            return IndexSetSpec.sphere(self.d, self.radius)
        if self.set == "ball":
            return IndexSetSpec.ball(self.d, self.radius)
        if self.set == "l1_ball":
            return IndexSetSpec.l1_ball(self.d, self.radius)
        if self.set == "sparse_sphere":
            if self.s is None:
                raise ConfigError("sparse_sphere needs s")
            if self.s > self.d:
                raise ConfigError("s must not exceed d")
            return IndexSetSpec.sparse_sphere(self.d, self.s, self.radius)
        if self.set == "ellipsoid":
            if self.axes is None:
                axes = [self.radius / math.sqrt(i) for i in range(1, self.d + 1)]
            else:
                axes = parse_float_list(self.axes)
                if len(axes) != self.d:
                    raise ConfigError(f"axes lists {len(axes)} values, d is {self.d}")
            return IndexSetSpec.ellipsoid(axes)
        return IndexSetSpec.finite([[0.0] * self.d])

    def radius_value(self) -> float | str:
        return self.R if self.R == "solve" else float(self.R)

    def n_grid(self) -> list[int]:
        return parse_n_grid(self.N_grid) if self.N_grid else [self.N]


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated number list: {text!r}") from None


def parse_n_grid(text: str) -> list[int]:
    """``64:4096:x2`` (geometric), ``64:512:+64`` (arithmetic) or ``64,256``."""
    text = text.strip()
    if ":" not in text:
        values = [int(v) for v in parse_float_list(text)]
    else:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be start:stop:step, got {text!r}")
        try:
            start, stop = int(parts[0]), int(parts[1])
            step = parts[2]
            factor = int(step[1:])
        except ValueError:
            raise ConfigError(f"malformed grid {text!r}") from None
        values = []
        current = start
        if step.startswith("x") and factor > 1:
            while current <= stop:
                values.append(current)
                current *= factor
        elif step.startswith("+") and factor > 0:
            while current <= stop:
                values.append(current)
                current += factor
        else:
            raise ConfigError(f"grid step must be xK (K > 1) or +K (K > 0), got {step!r}")
    if not values or any(v < 1 for v in values):
        raise ConfigError(f"grid {text!r} has no positive sample sizes")
    return values


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {number}: expected key=value, got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def serialize_config(config: RunConfig) -> str:
    """Inverse of ``load_config_text``; omits unset optional fields."""
    lines = []
    for key, value in sorted(config.model_dump(mode="json").items()):
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def build_run_config(
    command: Command, file_values: dict[str, Any], overrides: dict[str, Any]
) -> RunConfig:
    """File values, then flag overrides; the command argument wins over both."""
    merged = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    merged["command"] = command
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_text(text: str) -> RunConfig:
    values = parse_config_text(text)
    if "command" not in values:
        raise ConfigError("config text has no command")
    try:
        command = Command(values.pop("command"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return build_run_config(command, values, {})


def read_config_file(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values = parse_config_text(text)
    values.pop("command", None)
    return values
