# harness/experiments/oracle_mc.py
# Purpose: ρ⁽¹⁾ and bin-averaged ρ⁽²⁾ from the grand-canonical chain against the quadrature oracle in a small box,
# plus the integral and variance forms of χ against each other.

from __future__ import annotations

import logging
from typing import List

import numpy as np
from scipy import special

from fluctuations.configuration import Torus
from fluctuations.errors import OracleTractabilityError
from fluctuations.gibbs import GibbsParams, estimate_correlations, shell_volumes
from fluctuations.oracle import OracleSystem, oracle_system
from fluctuations.stats import Estimate
from harness.experiments.common import RunContext, chi_consistency, record, within_outcome
from harness.factory import STREAM_BOOTSTRAP, build_oracle_spec, build_potential, seed_for
from harness.schemas import ConfigError, ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

NAME = "oracle-mc"
BIN_NODES = 8


def bin_averaged_rho2(system: OracleSystem, edges: np.ndarray) -> np.ndarray:
    """Shell-volume weighted average of the oracle pair profile over each bin."""
    x, w = special.roots_legendre(BIN_NODES)
    d = system.spec.d
    out = np.empty(len(edges) - 1)
    for b, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        r = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        shell = r ** (d - 1)
        out[b] = float(np.sum(w * shell * system.pair_profile(r)) / np.sum(w * shell))
    return out


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    spec = build_oracle_spec(cfg)
    if spec.boundary != "periodic":
        raise ConfigError("oracle.boundary", "oracle-mc compares against the chain on a torus; use periodic")
    d = cfg.state.d
    phi = build_potential(cfg.potential, d)
    mc = cfg.monte_carlo
    n_cap = mc.max_particles if mc.max_particles is not None else spec.n_max
    if spec.truncation == "total" and n_cap != spec.n_max:
        raise ConfigError("monte_carlo.max_particles", f"must equal oracle.n_max={spec.n_max} for truncation 'total'")
    try:
        gp = GibbsParams(beta=cfg.state.beta, z=cfg.state.z, torus=Torus(spec.length, d), potential=phi,
                         max_particles=n_cap, step_size=mc.step_size)
        system = oracle_system(spec, phi, cfg.state.beta, cfg.state.z)
    except OracleTractabilityError as exc:
        raise ConfigError("oracle", str(exc)) from exc
    except ValueError as exc:
        raise ConfigError("state", str(exc)) from exc

    with ctx.timed("sample"):
        configs = ctx.sample(gp, 0)
    r_max = mc.r_max if mc.r_max is not None else spec.length / 2.0
    edges = np.linspace(0.0, r_max, mc.bins + 1)
    rng = np.random.default_rng(seed_for(cfg.seeds.base, 0, 0, STREAM_BOOTSTRAP))
    stats = estimate_correlations(configs, gp, edges, n_boot=ctx.bootstrap_resamples, rng=rng)
    with ctx.timed("oracle"):
        rho1_target = float(system.density_profile(np.full((1, d), spec.length / 2.0))[0])
        rho2_target = bin_averaged_rho2(system, edges)
    ctx.note("chain", {"autocorrelation_time": stats.autocorrelation_time, "block_length": stats.block_length})

    tol = cfg.tolerance
    rows = [record(NAME, "rho1", stats.rho1.value, within_outcome(stats.rho1, rho1_target, tol.n_sigma,
                                                                  tol.systematic * abs(rho1_target)),
                   eps=1.0, stderr=stats.rho1.stderr, target=rho1_target, note=f"n={stats.n_samples}")]
    uncovered = max(gp.volume - float(shell_volumes(np.array([0.0, r_max]), d)[0]), 0.0)
    rows.append(chi_consistency(NAME, stats, tol.n_sigma, eps=1.0, floor=abs(float(stats.u2[-1])) * uncovered))
    table = []
    for b, center in enumerate(stats.bin_centers):
        est = Estimate(float(stats.rho2[b]), float(stats.rho2_stderr[b]))
        target = float(rho2_target[b])
        outcome = within_outcome(est, target, tol.n_sigma, tol.systematic * abs(target))
        rows.append(record(NAME, "rho2_bin", est.value, outcome, eps=1.0, parameter=f"r={center:.4g}",
                           stderr=est.stderr, target=target))
        table.append({"r": float(center), "rho2_mc": est.value, "rho2_stderr": est.stderr, "rho2_oracle": target})
    ctx.table("rho2_profile", table)
    return rows
