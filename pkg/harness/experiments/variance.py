# harness/experiments/variance.py
# Purpose: variance of ⟨f, X_ε⟩ under μ_ε along the ε ladder against the white-noise value χ‖f‖₀²;
# for Poisson targets also the integral and variance forms of χ against each other.

from __future__ import annotations

import logging
import math
from typing import Dict, List

import numpy as np

from fluctuations.configuration import Configuration
from fluctuations.errors import SupportError
from fluctuations.gibbs import GibbsParams, estimate_correlations
from fluctuations.scaling import HermiteBasis, ScaledField, fluctuation_field, sobolev_norm_neg
from fluctuations.stats import Estimate, loglog_slope, mean_estimate, variance_estimate
from harness.experiments.common import RunContext, chi_consistency, record, trend_outcome, within_outcome
from harness.factory import (
    STREAM_BOOTSTRAP,
    build_coefficients,
    build_gibbs_params,
    build_potential,
    build_test_functions,
    seed_for,
)
from harness.schemas import ConfigError, ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

NAME = "variance-convergence"


def _sobolev_rows(cfg: ExperimentConfig, eps: float, fields: List[ScaledField]) -> List[ResultRecord]:
    d = cfg.state.d
    basis = HermiteBasis(d, cfg.sobolev.max_level, center=[cfg.state.L0 / 2.0] * d)
    orders = cfg.sobolev.orders or [d + 1, d + 3]
    try:
        pairings = np.array([basis.pairings(sf) for sf in fields])
    except SupportError as exc:
        raise ConfigError("sobolev.max_level", str(exc)) from exc
    rows = []
    for m in orders:
        if m < d + 1:
            raise ConfigError("sobolev.orders", f"order {m} is below d + 1 = {d + 1}")
        norms = [sobolev_norm_neg(v, m, basis).value for v in pairings]
        est = mean_estimate(norms)
        rows.append(record(NAME, "sobolev_norm", est.value, "exploratory", eps=eps, parameter=f"m={m}",
                           stderr=est.stderr, note=f"truncation={len(basis)}"))
    return rows


def _chi_row(cfg: ExperimentConfig, ctx: RunContext, gp: GibbsParams, configs: List[Configuration],
             eps_index: int, eps: float) -> ResultRecord:
    half = gp.torus.L / 2.0
    r_max = min(cfg.monte_carlo.r_max or half, half)
    edges = np.linspace(0.0, r_max, cfg.monte_carlo.bins + 1)
    rng = np.random.default_rng(seed_for(cfg.seeds.base, eps_index, 0, STREAM_BOOTSTRAP))
    with ctx.timed(f"correlations eps={eps:g}"):
        stats = estimate_correlations(configs, gp, edges, n_boot=ctx.bootstrap_resamples, rng=rng)
    # Poisson target: u⁽²⁾ = 0 outside the bins too
    return chi_consistency(NAME, stats, cfg.tolerance.n_sigma, eps=eps)


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    phi = build_potential(cfg.potential, cfg.state.d)
    fs = build_test_functions(cfg)
    coeffs = build_coefficients(cfg, phi)
    tol = cfg.tolerance
    ctx.note("coefficients", coeffs.as_row())

    rows: List[ResultRecord] = []
    gaps: Dict[str, Dict[float, Estimate]] = {f.id: {} for f in fs}
    poisson = None
    for i, eps in enumerate(cfg.ladder.eps):
        gp = build_gibbs_params(cfg, eps, phi)
        poisson = gp.is_poisson
        with ctx.timed(f"sample eps={eps:g}"):
            configs = ctx.sample(gp, i)
        fields = [ScaledField(c, eps, coeffs.rho1) for c in configs]
        for f in fs:
            target = coeffs.chi * f.norm0_sq
            est = variance_estimate([fluctuation_field(sf, f) for sf in fields])
            gaps[f.id][eps] = Estimate(abs(est.value - target), est.stderr)
            outcome = within_outcome(est, target, tol.n_sigma) if poisson else "exploratory"
            rows.append(record(NAME, "variance", est.value, outcome, eps=eps, parameter=f.id,
                               stderr=est.stderr, target=target, note=f"n={len(configs)}"))
        if cfg.sobolev.enabled:
            rows.extend(_sobolev_rows(cfg, eps, fields))
        if poisson:
            rows.append(_chi_row(cfg, ctx, gp, configs, i, eps))

    if poisson or len(cfg.ladder.eps) < 2:
        return rows
    largest, smallest = max(cfg.ladder.eps), min(cfg.ladder.eps)
    for f in fs:
        outcome, note = trend_outcome(gaps[f.id][smallest], gaps[f.id][largest], tol.n_sigma)
        rows.append(record(NAME, "gap_trend", gaps[f.id][smallest].value, outcome, eps=smallest, parameter=f.id,
                           stderr=gaps[f.id][smallest].stderr, target=gaps[f.id][largest].value, note=note))
        es = sorted(gaps[f.id])
        vals = [gaps[f.id][e].value for e in es]
        if sum(v > 0 for v in vals) >= 2:
            slope, se = loglog_slope(es, vals)
            rows.append(record(NAME, "gap_slope", slope, "exploratory", parameter=f.id,
                               stderr=se if math.isfinite(se) else math.nan))
    return rows
