# harness/schemas.py
# Purpose: Pydantic models for experiment configs and result records, so the YAML and CSV contracts stay stable.

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

Outcome = Literal["pass", "fail", "inconclusive", "exploratory"]


class ConfigError(ValueError):
    """Malformed or incomplete experiment config; `key` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class UnknownExperimentError(KeyError):
    def __init__(self, experiment_id: str, known: List[str]):
        self.experiment_id = experiment_id
        super().__init__(f"unknown experiment {experiment_id!r}; known: {', '.join(sorted(known))}")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialConfig(_Section):
    kind: Literal["zero", "bump", "lennard_jones"]
    id: str = ""
    height: float = 1.0
    width: float = 1.0
    epsilon: float = 1.0
    sigma: float = 1.0
    r_cut: float = 2.5
    r_switch: Optional[float] = None
    r_min: Optional[float] = None
    stability_constant: Optional[float] = None


class StateConfig(_Section):
    beta: float = Field(ge=0.0)
    z: float = Field(default=1.0, gt=0.0)
    L0: float = Field(gt=0.0)
    d: int = Field(ge=1, le=3)


class LadderConfig(_Section):
    eps: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])

    @model_validator(mode="after")
    def _check(self):
        if not self.eps or any(not 0.0 < e <= 1.0 for e in self.eps):
            raise ValueError("every eps must lie in (0, 1]")
        return self


class FunctionConfig(_Section):
    kind: Literal["fourier", "bump", "hermite"]
    id: str = ""
    k: Optional[List[int]] = None
    phase: Literal["cos", "sin"] = "cos"
    amplitude: float = 1.0
    center: Optional[List[float]] = None
    radius: Optional[float] = None
    index: Optional[List[int]] = None


class MonteCarloConfig(_Section):
    samples: int = Field(default=2000, ge=2)
    burn_in: int = Field(default=2000, ge=0)
    thinning: int = Field(default=10, ge=1)
    method: Literal["auto", "exact", "mcmc"] = "auto"
    max_particles: Optional[int] = None
    step_size: float = Field(default=0.5, gt=0.0)
    bins: int = Field(default=30, ge=1)
    r_max: Optional[float] = None


class DynamicsConfig(_Section):
    dt: float = Field(default=1e-3, gt=0.0)
    horizon: float = Field(default=1.0, ge=0.0)
    record_interval: float = Field(default=0.01, gt=0.0)
    replicas: int = Field(default=4, ge=1)
    lags: List[float] = Field(default_factory=lambda: [0.01, 0.02, 0.04, 0.08])
    window: float = Field(default=0.1, ge=0.0)


class SeedsConfig(_Section):
    base: int = 12345


class ToleranceConfig(_Section):
    n_sigma: float = 3.0
    systematic: float = 0.02
    rel_error: float = 1e-3
    curvature_rel: float = 0.05
    slope_band: float = 0.3
    alpha_min: float = 1.8
    free_alpha_band: float = 0.1
    ratio_band: Tuple[float, float] = (0.5, 2.0)
    plateau_spread: float = 0.5
    gap_abs: float = 1e-10
    close_pair_rate: float = 1e-4


class ExpansionConfig(_Section):
    source: Literal["ideal", "cluster", "boltzmann", "mc"] = "cluster"
    target: Literal["leading", "taylor"] = "leading"
    fd_step: float = Field(default=1e-2, gt=0.0)
    betas: List[float] = Field(default_factory=lambda: [0.0, 0.05, 0.1])


class SobolevConfig(_Section):
    enabled: bool = False
    orders: List[int] = Field(default_factory=list)
    max_level: int = Field(default=40, ge=0)


class OracleConfig(_Section):
    length: float = Field(gt=0.0)
    n_max: int = Field(default=4, ge=2)
    quad_points: int = Field(default=24, ge=4)
    truncation: Literal["total", "extra"] = "total"
    boundary: Literal["periodic", "free"] = "periodic"
    points: List[List[List[float]]] = Field(default_factory=list)
    h: float = Field(default=1e-3, gt=0.0)


class OutputConfig(_Section):
    directory: Optional[str] = None


class ExperimentConfig(_Section):
    experiment: Optional[str] = None
    description: str = ""
    potential: PotentialConfig
    state: StateConfig
    ladder: LadderConfig = Field(default_factory=LadderConfig)
    test_functions: List[FunctionConfig] = Field(default_factory=list)
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)
    dynamics: DynamicsConfig = Field(default_factory=DynamicsConfig)
    seeds: SeedsConfig = Field(default_factory=SeedsConfig)
    tolerance: ToleranceConfig = Field(default_factory=ToleranceConfig)
    expansion: ExpansionConfig = Field(default_factory=ExpansionConfig)
    sobolev: SobolevConfig = Field(default_factory=SobolevConfig)
    oracle: Optional[OracleConfig] = None
    output: OutputConfig = Field(default_factory=OutputConfig)


class ResultRecord(BaseModel):
    """One gated or reported number; wall-clock lives in timings.csv, outside this record."""

    experiment: str
    rule: str
    eps: Optional[float] = None
    parameter: str = ""
    estimate: float
    stderr: float = float("nan")
    target: Optional[float] = None
    outcome: Outcome
    note: str = ""


RESULT_FIELDS = list(ResultRecord.model_fields.keys())


def _dotted(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(p) for p in loc)


def parse_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(_dotted(err.get("loc", ())), err.get("msg", "invalid value")) from exc


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    p = Path(path).expanduser()
    if not p.exists():
        raise ConfigError("", f"config not found: {p}")
    with p.open("r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("", f"unreadable YAML in {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("", f"{p} must hold a mapping at top level")
    return parse_experiment_config(data)
