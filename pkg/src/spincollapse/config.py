"""Run configuration: a TOML document validated into typed sections.

Every key has a default, so an empty file is a complete configuration.
Unknown keys are rejected and range errors name the offending key path.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .model import ModelConfig
from .solvers import ChebyshevConfig, LanczosConfig, TrajectoryConfig

__all__ = [
    "ModelSection",
    "TrajectorySection",
    "ChebyshevSection",
    "LanczosSection",
    "ExperimentSection",
    "RootConfig",
    "load_config",
    "parse_config",
    "apply_overrides",
]

# mu * N_A is held at 48 so the fully polarised field acts the same on every spin
MU_TIMES_NA = 48.0


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Section):
    N_A: Literal[4, 8] = 4
    N_E: int = Field(15, ge=1, le=26)
    gamma: float = Field(0.1, ge=0.0, le=1.0)
    Delta: float = Field(0.3, ge=0.0)
    Omega: float = Field(0.8, ge=0.0)
    Theta: float = Field(0.5, ge=0.0)
    mu: Optional[float] = Field(None, ge=0.0)
    J: float = Field(1.0, gt=0.0)
    Gamma: float = 1.0

    @model_validator(mode="after")
    def _default_mu(self):
        if self.mu is None:
            object.__setattr__(self, "mu", MU_TIMES_NA / self.N_A)
        return self

    def to_model_config(self):
        return ModelConfig(
            n_app=self.N_A, n_env=self.N_E, gamma=self.gamma, delta=self.Delta,
            omega=self.Omega, theta=self.Theta, mu=self.mu, J=self.J, sys_app=self.Gamma,
        )


class TrajectorySection(_Section):
    dt: float = Field(0.01, gt=0.0)
    t_max: float = Field(200.0, gt=0.0)
    record_stride: int = Field(10, ge=1)
    norm_tolerance: float = Field(1e-9, gt=0.0)
    energy_tolerance: float = Field(1e-6, gt=0.0)
    field_rule: Literal["midpoint", "start"] = "midpoint"
    field_tolerance: float = Field(1e-11, gt=0.0)
    max_field_iterations: int = Field(50, ge=1)

    @model_validator(mode="after")
    def _span(self):
        if self.t_max < self.dt:
            raise ValueError("t_max must be >= dt")
        return self

    def to_trajectory_config(self):
        return TrajectoryConfig(**self.model_dump())


class ChebyshevSection(_Section):
    truncation_tolerance: float = Field(1e-15, gt=0.0)
    max_order: int = Field(2000, ge=1)

    def to_chebyshev_config(self):
        return ChebyshevConfig(**self.model_dump())


class LanczosSection(_Section):
    max_iterations: int = Field(500, ge=1)
    residual_tolerance: float = Field(1e-10, gt=0.0)
    reorthogonalization: Literal["FULL", "NONE"] = "FULL"

    def to_lanczos_config(self, start_seed):
        return LanczosConfig(start_seed=int(start_seed), **self.model_dump())


class ExperimentSection(_Section):
    theta_grid_degrees: List[float] = Field(default_factory=lambda: [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0])
    phi: float = Field(0.0, ge=0.0, lt=2.0 * math.pi)
    runs_per_theta: int = Field(96, ge=1)
    m_threshold: Optional[float] = Field(None, gt=0.0)
    dwell: float = Field(20.0, ge=0.0)
    base_seed: int = Field(0, ge=0)

    @field_validator("theta_grid_degrees")
    @classmethod
    def _grid(cls, v):
        if not v:
            raise ValueError("theta grid must not be empty")
        for th in v:
            if not 0.0 <= th <= 90.0:
                raise ValueError(f"theta {th} outside [0, 90] degrees")
        return v


class RootConfig(_Section):
    model: ModelSection = Field(default_factory=ModelSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    chebyshev: ChebyshevSection = Field(default_factory=ChebyshevSection)
    lanczos: LanczosSection = Field(default_factory=LanczosSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)

    @property
    def m_threshold(self):
        """Half of full polarisation unless set explicitly."""
        m = self.experiment.m_threshold
        return 0.5 * (self.model.N_A / 2.0) if m is None else m

    def echo(self):
        """Plain-dict copy with every default resolved."""
        d = self.model_dump()
        d["experiment"]["m_threshold"] = self.m_threshold
        return d


def _format_error(exc):
    parts = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{path}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data):
    """Validate a nested mapping into a :class:`RootConfig`."""
    try:
        return RootConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_format_error(exc)}") from None


def load_config(path=None):
    """Read a TOML file; ``None`` gives the default configuration."""
    if path is None:
        return parse_config({})
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from None
    return parse_config(data)


def _coerce(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg, overrides):
    """Return a new config with ``section.key=value`` strings applied.

    Values are read as TOML literals, falling back to bare strings, so
    ``model.mu=0`` and ``experiment.theta_grid_degrees=[0, 90]`` both work.
    """
    data = cfg.model_dump()
    # an unset mu follows N_A, so drop the resolved value before re-validating
    if "mu" not in cfg.model.model_fields_set:
        del data["model"]["mu"]
    if "m_threshold" not in cfg.experiment.model_fields_set:
        del data["experiment"]["m_threshold"]
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        section, _, name = key.partition(".")
        if not name:
            raise ConfigError(f"override key {key!r} needs a section, e.g. model.mu")
        if section not in data:
            raise ConfigError(f"unknown config section {section!r}")
        data[section][name] = _coerce(value)
    return parse_config(data)
