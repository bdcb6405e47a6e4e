"""
harness/factory.py

Builds engine objects from a validated experiment config.
- Potentials, ε-scaled tori and GibbsParams for each ladder point.
- Test-function families on the fixed scaled torus of side L₀.
- OU parameters / centering density from the configured expansion source (analytic or sampled).
- Seeds: one SeedSequence([base, ε index, replica, stream]) per independent stream.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml
from dotenv import load_dotenv

from fluctuations.configuration import Torus
from fluctuations.expansion import ExpansionCoefficients, Rho2Approximant, approximant, coefficients
from fluctuations.gibbs import GibbsParams, estimate_correlations, run_chain
from fluctuations.oracle import FiniteVolumeSpec
from fluctuations.oulimit import OUParams
from fluctuations.potentials import PairPotential
from fluctuations.scaling import CompactBump, FourierMode, HermiteProxy, TestFunction
from harness.schemas import ConfigError, ExperimentConfig, FunctionConfig, PotentialConfig
from harness.setting import settings

logger = logging.getLogger(__name__)

load_dotenv()

STREAM_SAMPLE = 0
STREAM_DYNAMICS = 1
STREAM_BOOTSTRAP = 2
STREAM_CONTROL = 3
STREAM_COEFFICIENTS = 4


def _load_cfg(cfg_path: str | Path) -> Dict[str, Any]:
    p = Path(cfg_path).expanduser()
    if not p.exists():
        raise FileNotFoundError(f"Runtime config not found: {p}")
    with p.open("r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def _coerce_int(value: Any, default: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        return default


def _coerce_bool(value: Any, default: bool = False) -> bool:
    if value is None:
        return default
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in {"1", "true", "yes", "on"}


def load_runtime(cfg_path: Optional[str | Path] = None) -> Dict[str, Any]:
    """Runtime defaults (workers, output root, logging level); env vars win over the file."""
    path = cfg_path or os.environ.get("FLUCT_RUNTIME") or settings.runtime
    try:
        cfg = _load_cfg(path)
    except FileNotFoundError:
        logger.debug("runtime config %s not found; using settings defaults", path)
        cfg = {}
    run_cfg = cfg.get("runtime", {}) or {}
    return {
        "workers": _coerce_int(os.environ.get("FLUCT_WORKERS", run_cfg.get("workers")), settings.workers),
        "output_root": Path(os.environ.get("FLUCT_OUTPUT_ROOT") or run_cfg.get("output_root") or settings.output_root),
        "log_level": str(os.environ.get("FLUCT_LOG_LEVEL") or run_cfg.get("log_level") or settings.log_level).upper(),
        "bootstrap_resamples": _coerce_int(run_cfg.get("bootstrap_resamples"), settings.bootstrap_resamples),
        "write_snapshots": _coerce_bool(run_cfg.get("write_snapshots"), True),
    }


# ---------- seeds ----------
def seed_for(base: int, eps_index: int, replica: int, stream: int = STREAM_SAMPLE) -> int:
    return int(np.random.SeedSequence([int(base), int(eps_index), int(replica), int(stream)]).generate_state(1)[0])


# ---------- potentials ----------
def build_potential(pc: PotentialConfig, d: int) -> PairPotential:
    try:
        if pc.kind == "zero":
            return PairPotential.zero(d)
        if pc.kind == "bump":
            kw = {} if pc.stability_constant is None else {"stability_constant": pc.stability_constant}
            return PairPotential.bump(d, height=pc.height, width=pc.width, **kw)
        kw = {k: v for k, v in (("r_switch", pc.r_switch), ("r_min", pc.r_min),
                                ("stability_constant", pc.stability_constant)) if v is not None}
        return PairPotential.lennard_jones(d, epsilon=pc.epsilon, sigma=pc.sigma, r_cut=pc.r_cut, **kw)
    except ValueError as exc:
        raise ConfigError("potential", str(exc)) from exc


def potential_id(cfg: ExperimentConfig) -> str:
    return cfg.potential.id or cfg.potential.kind


# ---------- test functions ----------
def build_test_function(fc: FunctionConfig, L0: float, d: int, key: str = "test_functions") -> TestFunction:
    center = fc.center if fc.center is not None else [L0 / 2.0] * d
    try:
        if fc.kind == "fourier":
            if fc.k is None or len(fc.k) != d:
                raise ConfigError(f"{key}.k", f"Fourier mode needs an integer vector of length {d}")
            return FourierMode(tuple(fc.k), L0, fc.phase, fc.amplitude, fc.id)
        if len(center) != d:
            raise ConfigError(f"{key}.center", f"center must have {d} coordinates")
        if fc.kind == "bump":
            if fc.radius is None:
                raise ConfigError(f"{key}.radius", "compact bump needs a radius")
            return CompactBump(tuple(center), fc.radius, fc.amplitude, L0, fc.id)
        index = fc.index if fc.index is not None else [0] * d
        if len(index) != d:
            raise ConfigError(f"{key}.index", f"Hermite index must have {d} entries")
        return HermiteProxy(tuple(index), tuple(center), L0, id=fc.id)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(key, str(exc)) from exc


def build_test_functions(cfg: ExperimentConfig) -> List[TestFunction]:
    fs = [build_test_function(fc, cfg.state.L0, cfg.state.d, f"test_functions.{i}")
          for i, fc in enumerate(cfg.test_functions)]
    if not fs:
        k = [1] + [0] * (cfg.state.d - 1)
        fs = [FourierMode(tuple(k), cfg.state.L0, "cos")]
    ids = [f.id for f in fs]
    if len(set(ids)) != len(ids):
        raise ConfigError("test_functions", f"duplicate test-function ids {ids}")
    torus = Torus(cfg.state.L0, cfg.state.d)
    for i, f in enumerate(fs):
        try:
            f.check_support(torus)
        except ValueError as exc:
            raise ConfigError(f"test_functions.{i}", str(exc)) from exc
    return fs


# ---------- Gibbs / oracle ----------
def build_gibbs_params(cfg: ExperimentConfig, eps: float, phi: Optional[PairPotential] = None) -> GibbsParams:
    """Target on the microscopic torus of side L₀/ε."""
    phi = phi or build_potential(cfg.potential, cfg.state.d)
    mc = cfg.monte_carlo
    try:
        return GibbsParams(
            beta=cfg.state.beta,
            z=cfg.state.z,
            torus=Torus(cfg.state.L0 / eps, cfg.state.d),
            potential=phi,
            max_particles=mc.max_particles,
            step_size=mc.step_size,
        )
    except ValueError as exc:
        raise ConfigError("state", str(exc)) from exc


def build_oracle_spec(cfg: ExperimentConfig) -> FiniteVolumeSpec:
    oc = cfg.oracle
    if oc is None:
        raise ConfigError("oracle", "this experiment needs an oracle section")
    try:
        return FiniteVolumeSpec(length=oc.length, d=cfg.state.d, boundary=oc.boundary, n_max=oc.n_max,
                                quad_points=oc.quad_points, truncation=oc.truncation)
    except ValueError as exc:
        raise ConfigError("oracle", str(exc)) from exc


# ---------- limit coefficients ----------
_MC_COEFFICIENTS: Dict[str, ExpansionCoefficients] = {}


def _mc_coefficients(cfg: ExperimentConfig, phi: PairPotential) -> ExpansionCoefficients:
    """ρ⁽²⁾ sampled on the ε = 1 torus, binned to min(r_max, L₀/2) and interpolated."""
    key = cfg.model_dump_json()
    if key in _MC_COEFFICIENTS:
        return _MC_COEFFICIENTS[key]
    gp = build_gibbs_params(cfg, 1.0, phi)
    mc = cfg.monte_carlo
    r_max = min(mc.r_max or 2.0 * phi.interaction_range, gp.torus.L / 2.0)
    seed = seed_for(cfg.seeds.base, 0, 0, STREAM_COEFFICIENTS)
    try:
        run = run_chain(gp, mc.samples, mc.thinning, mc.burn_in, seed, method=mc.method)
        stats = estimate_correlations(run.configurations, gp, np.linspace(0.0, r_max, mc.bins + 1), n_boot=0)
        out = coefficients(phi, cfg.state.beta, Rho2Approximant.from_mc(stats))
    except ValueError as exc:
        raise ConfigError("expansion.source", f"mc coefficients: {exc}") from exc
    logger.info("mc coefficients from %d samples (seed %d, r_max=%g): chi=%.6g", stats.n_samples, seed, r_max, out.chi)
    _MC_COEFFICIENTS[key] = out
    return out


def build_coefficients(cfg: ExperimentConfig, phi: Optional[PairPotential] = None) -> ExpansionCoefficients:
    """Coefficients from the configured source; `mc` samples ρ⁽²⁾ once per config and caches the result."""
    phi = phi or build_potential(cfg.potential, cfg.state.d)
    z, beta = cfg.state.z, cfg.state.beta
    source = cfg.expansion.source
    if source == "ideal" or phi.is_zero or beta == 0.0:
        return ExpansionCoefficients(z, z, 1.0, z, 0.0, "low_beta_analytic", "boltzmann", beta)
    if source == "mc":
        return _mc_coefficients(cfg, phi)
    return coefficients(phi, beta, approximant(phi, beta, source, z))


def build_ou_params(cfg: ExperimentConfig, phi: Optional[PairPotential] = None) -> OUParams:
    return OUParams.from_coefficients(build_coefficients(cfg, phi))
