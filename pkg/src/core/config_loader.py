# src/core/config_loader.py

from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.errors import ParameterError
from tools.models import (
    BallDomain,
    ConstantRadius,
    DomainSpec,
    ProcessParams,
    ProxyProblem,
    RadiusLaw,
)

SCHEMA_VERSION = 1


class Settings(BaseSettings):
    # Output settings
    OUTPUT_DIR: str = "output"
    LOG_LEVEL: str = "INFO"

    # Resource caps
    MAX_EXPECTED_POINTS: float = 5e7
    MAX_GRID_CELLS: float = 8e6

    # Proxy solver
    SOLVER_RTOL: float = 1e-8
    SOLVER_MAX_ITERATIONS: int = 20000
    SOLVER_RESTARTS: int = 3

    # Sweeps
    SWEEP_WORKERS: int = 4
    MC_SAMPLES: int = 1_000_000

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )


class UnknownConfigKeysError(ParameterError):
    def __init__(self, keys: List[str]):
        super().__init__(f"Unknown config keys: {', '.join(keys)}")
        self.keys = keys


# ------------------------------------------------------------- run sections


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProcessSection(_Section):
    intensity: float = Field(1.0, ge=0.0)
    radius_law: RadiusLaw = Field(default_factory=ConstantRadius)
    seed: int = Field(0, ge=0, lt=2**64)
    n_seeds: int = Field(20, ge=1)

    def params(self) -> ProcessParams:
        return ProcessParams(
            intensity=self.intensity, radius_law=self.radius_law, seed=self.seed
        )


class PerforationSection(_Section):
    alpha: float = 4.0
    eps: List[float] = [0.1, 0.07, 0.05, 0.035, 0.025]
    tau: float = Field(2.0, ge=1.0)
    kappa: float = 1.5
    # m_r; defaults to the radius law's moment supremum
    moment_exponent: Optional[float] = Field(None, gt=0.0)
    allow_inadmissible: bool = False


class CutoffSection(_Section):
    q: float = 2.0
    eps: Optional[List[float]] = None
    tolerance: float = Field(0.1, gt=0.0)


class SllnSection(_Section):
    m: List[float] = [0.0, 2.0, 3.0]
    eps: List[float] = [0.2, 0.1, 0.05]
    filtered: bool = False
    se_band: float = Field(4.0, gt=0.0)


class MeasuresSection(_Section):
    volume_tolerance: float = Field(0.3, gt=0.0)
    count_tolerance: float = Field(0.2, gt=0.0)
    surface_tolerance: float = Field(0.3, gt=0.0)
    min_r_squared: float = Field(0.99, ge=0.0, le=1.0)


class ProxySection(_Section):
    conductivity: float = Field(1.0, gt=0.0)
    robin_coefficient: float = Field(1.0, gt=0.0)
    theta0_value: float = 1.0
    theta0_gradient: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    min_temperature: float = Field(1e-3, gt=0.0)
    source: float = 1.0
    h_max: float = Field(1.0 / 32.0, gt=0.0)
    cells_per_radius: float = Field(2.0, ge=2.0)
    trace_cells_per_radius: float = Field(4.0, ge=4.0)
    insulated_axes: Tuple[int, ...] = ()
    m_theta: float = Field(3.0, gt=0.0)
    eps: Optional[List[float]] = None
    n_seeds: int = Field(1, ge=1)
    trace_tolerance: float = Field(0.2, gt=0.0)
    preconditioner: Literal["jacobi", "amg"] = "jacobi"
    # Write one lattice dump per eps (seed 0)
    dump_fields: bool = False

    def problem(self, grid_spacing: Optional[float] = None) -> ProxyProblem:
        return ProxyProblem(
            conductivity=self.conductivity,
            robin_coefficient=self.robin_coefficient,
            theta0_value=self.theta0_value,
            theta0_gradient=self.theta0_gradient,
            min_temperature=self.min_temperature,
            source=self.source,
            grid_spacing=grid_spacing,
            insulated_axes=self.insulated_axes,
            m_theta=self.m_theta,
        )


class RegimeSection(_Section):
    gamma: float = 2.5
    m_theta: float = 3.0


class FitSection(_Section):
    target: Optional[float] = None
    tolerance: float = Field(0.1, gt=0.0)


class RunConfig(_Section):
    schema_version: Literal[1] = SCHEMA_VERSION
    process: ProcessSection = Field(default_factory=ProcessSection)
    domain: DomainSpec = Field(default_factory=BallDomain)
    perforation: PerforationSection = Field(default_factory=PerforationSection)
    cutoff: CutoffSection = Field(default_factory=CutoffSection)
    slln: SllnSection = Field(default_factory=SllnSection)
    measures: MeasuresSection = Field(default_factory=MeasuresSection)
    proxy: ProxySection = Field(default_factory=ProxySection)
    regimes: RegimeSection = Field(default_factory=RegimeSection)
    fit: FitSection = Field(default_factory=FitSection)
    output_dir: Optional[str] = None

    def moment_exponent(self) -> float:
        if self.perforation.moment_exponent is not None:
            return self.perforation.moment_exponent
        return self.process.radius_law.moment_supremum


# ---------------------------------------------------------------- loading


def apply_overrides(raw: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Merge CLI flag overrides (``--seed``, ``--eps`` ...) into a raw config mapping.

    ``--eps`` replaces every ε list so the whole run sweeps the same values.
    """
    merged = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "seed":
            merged.setdefault("process", {})["seed"] = value
        elif key == "n_seeds":
            merged.setdefault("process", {})["n_seeds"] = value
        elif key == "alpha":
            merged.setdefault("perforation", {})["alpha"] = value
        elif key == "eps":
            for section in ("perforation", "cutoff", "slln", "proxy"):
                merged.setdefault(section, {})["eps"] = list(value)
        elif key == "tolerance":
            merged.setdefault("cutoff", {})["tolerance"] = value
            merged.setdefault("fit", {})["tolerance"] = value
        elif key == "output_dir":
            merged["output_dir"] = str(value)
        else:
            raise ParameterError(f"Unsupported override: {key}")
    return merged


def _unknown_keys(error: ValidationError) -> List[str]:
    return [
        ".".join(str(part) for part in item["loc"])
        for item in error.errors()
        if item["type"] == "extra_forbidden"
    ]


def parse_run_config(raw: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        unknown = _unknown_keys(e)
        if unknown:
            raise UnknownConfigKeysError(unknown) from e
        raise ParameterError(f"Invalid run config: {e}") from e


def load_run_config(
    path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ParameterError(f"Cannot read config {path}: {e}") from e
        if not isinstance(raw, dict):
            raise ParameterError(f"Config {path} must be a mapping at top level")
    return parse_run_config(apply_overrides(raw, overrides or {}))


def dump_run_config(config: RunConfig) -> str:
    data = config.model_dump(mode="json")
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=False)
