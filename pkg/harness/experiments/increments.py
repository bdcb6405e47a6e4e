# harness/experiments/increments.py
# Purpose: fourth-moment increments E|⟨f, X_ε(t+τ)⟩ − ⟨f, X_ε(t)⟩|⁴ along equilibrium runs and their power in τ.

from __future__ import annotations

import logging
import math
from typing import List, Tuple

import numpy as np

from fluctuations.oulimit import free_increment_moments
from fluctuations.scaling import FieldSeries, FourierMode
from fluctuations.stats import loglog_slope
from harness.experiments.common import RunContext, gate, lag_steps, record, replica_estimate, within_outcome
from harness.factory import build_coefficients, build_gibbs_params, build_potential, build_test_functions
from harness.schemas import ExperimentConfig, Outcome, ResultRecord, ToleranceConfig

logger = logging.getLogger(__name__)

NAME = "increment-moments"


def fourth_moment(x: np.ndarray, k: int) -> float:
    """Time average of (x[t+k] − x[t])⁴ over all overlapping windows."""
    if k <= 0:
        return 0.0
    if k >= len(x):
        raise ValueError(f"lag of {k} records exceeds the series length {len(x)}")
    return float(np.mean((x[k:] - x[:-k]) ** 4))


def alpha_outcome(alpha: float, se: float, free: bool, tol: ToleranceConfig) -> Tuple[Outcome, float]:
    """
    Free Fourier modes: α = 2 within ±free_alpha_band, inconclusive while the fit stderr exceeds the band.
    Otherwise α >= alpha_min, inconclusive when the n_sigma interval straddles it.
    """
    if free:
        band = tol.free_alpha_band
        if not math.isfinite(se) or se > band:
            return "inconclusive", 2.0
        return gate(abs(alpha - 2.0) <= band), 2.0
    if not math.isfinite(se):
        return "inconclusive", tol.alpha_min
    if alpha >= tol.alpha_min:
        return "pass", tol.alpha_min
    if alpha + tol.n_sigma * se >= tol.alpha_min:
        return "inconclusive", tol.alpha_min
    return "fail", tol.alpha_min


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    phi = build_potential(cfg.potential, cfg.state.d)
    fs = build_test_functions(cfg)
    coeffs = build_coefficients(cfg, phi)
    tol = cfg.tolerance
    lags = np.asarray(cfg.dynamics.lags, dtype=float)

    rows: List[ResultRecord] = []
    for i, eps in enumerate(cfg.ladder.eps):
        gp = build_gibbs_params(cfg, eps, phi)
        with ctx.timed(f"dynamics eps={eps:g}"):
            series: List[FieldSeries] = ctx.replicas(i, eps, fs, coeffs.rho1)
        interval = float(series[0].times[1] - series[0].times[0]) if len(series[0].times) > 1 else cfg.dynamics.record_interval
        ks = lag_steps(cfg, interval)
        for f in fs:
            per_lag = [replica_estimate([fourth_moment(s.column(f.id), k) for s in series]) for k in ks]
            free = gp.is_poisson and isinstance(f, FourierMode) and not f.is_constant
            closed = free_increment_moments(f, lags, gp.z, eps)[1] if free else None
            for j, (lag, est) in enumerate(zip(lags, per_lag)):
                if free:
                    outcome = within_outcome(est, float(closed[j]), tol.n_sigma)
                    target = float(closed[j])
                else:
                    outcome, target = "exploratory", None
                rows.append(record(NAME, "fourth_moment", est.value, outcome, eps=eps, parameter=f"{f.id}@{lag:g}",
                                   stderr=est.stderr, target=target, note=f"replicas={len(series)}"))
            values = [e.value for e in per_lag]
            if sum(v > 0 for v in values) < 2:
                rows.append(record(NAME, "alpha", math.nan, "inconclusive", eps=eps, parameter=f.id,
                                   note="fewer than two positive moments"))
                continue
            alpha, se = loglog_slope(lags, values)
            outcome, target = alpha_outcome(alpha, se, free, tol)
            rows.append(record(NAME, "alpha", alpha, outcome, eps=eps, parameter=f.id, stderr=se, target=target))
    return rows
