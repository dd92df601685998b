"""Scenario configuration files.

Configs are TOML documents validated against a strict schema: unknown
keys are errors, and every error message names the offending field path
(TOML syntax errors carry the line and column).  The current dialect is
``schema_version = 1``::

    schema_version = 1

    [[setup]]
    name = "setup-2"
    mass_kg = 1e-14
    omega_rad_s = 100.0
    delta_x = 100.0
    distance_m = 40e-6
    density_kg_m3 = 3.5e3      # or radius_m

    [protocol]
    t_minus = 12.0             # optional; subcommands fall back to T_o^G
    t0 = 3.141592653589793

    [noise]
    gamma_x = 0.0
    gamma_q_hz = 0.0
    sigma_f_n = 0.0
    [noise.gas]
    temperature_k = 1.0

    [run]
    seed = 0
    format = "csv"

Optional per-command sections (``[grid]``, ``[trajectory]``,
``[wigner]``, ``[force]``, ``[gie]``, ``[robustness]``) are documented
on their models below.
"""

from __future__ import annotations

import math
import sys
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):  # pragma: no cover
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .decoherence import M_AIR, GasParams
from .interferometer import TrapSetup

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised for unreadable or invalid configuration files."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SetupConfig(_Strict):
    name: str = "setup"
    mass_kg: float = Field(gt=0)
    omega_rad_s: float = Field(gt=0)
    delta_x: float = Field(ge=0)
    distance_m: Optional[float] = Field(default=None, gt=0)
    theta_rad: float = 0.0
    radius_m: Optional[float] = Field(default=None, gt=0)
    density_kg_m3: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_size(self):
        if self.radius_m is not None and self.density_kg_m3 is not None:
            raise ValueError("give either radius_m or density_kg_m3, not both")
        return self

    def to_setup(self) -> TrapSetup:
        if self.density_kg_m3 is not None:
            return TrapSetup.from_density(
                self.mass_kg, self.omega_rad_s, self.delta_x, self.density_kg_m3, distance=self.distance_m, theta=self.theta_rad
            )
        return TrapSetup(self.mass_kg, self.omega_rad_s, self.delta_x, self.distance_m, self.theta_rad, self.radius_m)


class ProtocolConfig(_Strict):
    t_minus: Optional[float] = Field(default=None, ge=0)
    t0: float = Field(default=math.pi, ge=0)


class GasConfig(_Strict):
    pressure_pa: float = Field(default=0.0, ge=0)
    temperature_k: float = Field(default=1.0, gt=0)
    m_air_kg: float = Field(default=M_AIR, gt=0)
    v_bar_m_s: Optional[float] = Field(default=None, gt=0)

    def to_gas(self, radius: float) -> GasParams:
        return GasParams(self.pressure_pa, radius, self.temperature_k, self.m_air_kg, self.v_bar_m_s)


class NoiseConfig(_Strict):
    gamma_x: float = Field(default=0.0, ge=0)
    gamma_q_hz: float = Field(default=0.0, ge=0)
    sigma_f_n: float = Field(default=0.0, ge=0)
    strict_rates: bool = False
    gas: GasConfig = GasConfig()


class RunConfig(_Strict):
    seed: int = Field(default=0, ge=0, lt=2**64)
    samples: int = Field(default=100_000, ge=1000)
    format: Literal["csv", "json"] = "csv"
    out: Optional[str] = None
    setup: Optional[str] = None
    """Name of the set-up used by single-set-up commands (default: first)."""


class GridConfig(_Strict):
    """Expansion-time grid for force, gie and robustness sweeps (units of 1/omega)."""

    t_start: float = Field(default=0.0, ge=0)
    t_stop: float = Field(default=4.0 * math.pi, ge=0)
    t_points: int = Field(default=81, ge=1, le=100_000)

    @model_validator(mode="after")
    def _order(self):
        if self.t_stop < self.t_start:
            raise ValueError("t_stop must not be below t_start")
        return self


class TrajectoryConfig(_Strict):
    points: int = Field(default=201, ge=2, le=1_000_000)


class WignerConfig(_Strict):
    times: List[float] = [0.0]
    x_min: float = -1.0
    x_max: float = 1.0
    p_min: float = -1.0
    p_max: float = 1.0
    points: int = Field(default=101, ge=2, le=2001)
    prefactor: Literal["normalized", "printed"] = "normalized"

    @field_validator("times")
    @classmethod
    def _nonneg(cls, v):
        if any(t < 0 for t in v):
            raise ValueError("times must be non-negative")
        return v


class ForceConfig(_Strict):
    force_n: float = 1e-26


class GieConfig(_Strict):
    gamma_q_over_omega: List[float] = [0.0]

    @field_validator("gamma_q_over_omega")
    @classmethod
    def _nonneg(cls, v):
        if any(g < 0 for g in v):
            raise ValueError("rates must be non-negative")
        return v


class RobustnessConfig(_Strict):
    sigma_eps: List[float] = [1e-6, 1e-5, 1e-4]
    f_avg: float = Field(default=0.0, ge=-1, le=1)
    method: Literal["importance", "plain"] = "importance"


class ScenarioConfig(_Strict):
    schema_version: int
    setup: List[SetupConfig] = Field(min_length=1)
    protocol: ProtocolConfig = ProtocolConfig()
    noise: NoiseConfig = NoiseConfig()
    run: RunConfig = RunConfig()
    grid: GridConfig = GridConfig()
    trajectory: TrajectoryConfig = TrajectoryConfig()
    wigner: WignerConfig = WignerConfig()
    force: ForceConfig = ForceConfig()
    gie: GieConfig = GieConfig()
    robustness: RobustnessConfig = RobustnessConfig()

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; expected {SCHEMA_VERSION}")
        return v

    @model_validator(mode="after")
    def _names(self):
        names = [s.name for s in self.setup]
        if len(set(names)) != len(names):
            raise ValueError("set-up names must be unique")
        if self.run.setup is not None and self.run.setup not in names:
            raise ValueError(f"run.setup {self.run.setup!r} is not a configured set-up")
        return self

    def selected_setup(self) -> SetupConfig:
        if self.run.setup is None:
            return self.setup[0]
        return next(s for s in self.setup if s.name == self.run.setup)


def _format_errors(source: str, exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ""
        for part in err["loc"]:
            loc += f"[{part}]" if isinstance(part, int) else (f".{part}" if loc else str(part))
        lines.append(f"{source}: {loc or '<root>'}: {err['msg']}")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    """Parse and validate TOML text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(source, exc)) from None


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(p))


def default_config_text() -> str:
    """The shipped three-set-up configuration."""
    return resources.files("catlift").joinpath("data/setups.toml").read_text(encoding="utf-8")


def default_config() -> ScenarioConfig:
    return parse_config(default_config_text(), "catlift/data/setups.toml")
