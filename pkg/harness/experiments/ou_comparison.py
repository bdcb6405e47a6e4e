# harness/experiments/ou_comparison.py
# Purpose: lag autocovariance of Fourier-mode pairings from Langevin runs against the OU prediction.

from __future__ import annotations

import logging
from typing import Dict, List

import numpy as np

from fluctuations.oulimit import OUParams, ou_autocov
from fluctuations.scaling import FourierMode
from fluctuations.stats import Estimate
from harness.experiments.common import RunContext, lag_steps, record, replica_estimate, trend_outcome, within_outcome
from harness.factory import build_coefficients, build_gibbs_params, build_potential, build_test_functions
from harness.schemas import ConfigError, ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

NAME = "ou-comparison"


def autocovariance(x: np.ndarray, k: int) -> float:
    """Time average of x[t]·x[t+k]; pairings of non-constant Fourier modes have mean zero."""
    if k >= len(x):
        raise ValueError(f"lag of {k} records exceeds the series length {len(x)}")
    return float(np.mean(x[: len(x) - k] * x[k:]))


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    phi = build_potential(cfg.potential, cfg.state.d)
    fs = [f for f in build_test_functions(cfg) if isinstance(f, FourierMode) and not f.is_constant]
    if not fs:
        raise ConfigError("test_functions", "ou-comparison needs at least one non-constant Fourier mode")
    coeffs = build_coefficients(cfg, phi)
    ou = OUParams.from_coefficients(coeffs)
    tol = cfg.tolerance
    ctx.note("coefficients", coeffs.as_row())

    rows: List[ResultRecord] = []
    deviation: Dict[str, Dict[float, Estimate]] = {f.id: {} for f in fs}
    poisson = None
    for i, eps in enumerate(cfg.ladder.eps):
        gp = build_gibbs_params(cfg, eps, phi)
        poisson = gp.is_poisson
        with ctx.timed(f"dynamics eps={eps:g}"):
            series = ctx.replicas(i, eps, fs, ou.rho1)
        interval = float(series[0].times[1] - series[0].times[0]) if len(series[0].times) > 1 else cfg.dynamics.record_interval
        ks = [0] + lag_steps(cfg, interval)
        lags = [k * interval for k in ks]
        for f in fs:
            devs, ses = [], []
            for k, lag in zip(ks, lags):
                est = replica_estimate([autocovariance(s.column(f.id), k) for s in series])
                target = float(ou_autocov(f, lag, ou))
                outcome = within_outcome(est, target, tol.n_sigma) if poisson else "exploratory"
                rows.append(record(NAME, "autocov", est.value, outcome, eps=eps, parameter=f"{f.id}@{lag:g}",
                                   stderr=est.stderr, target=target))
                devs.append(abs(est.value - target) / abs(target))
                ses.append(est.stderr / abs(target))
            dev = Estimate(float(np.mean(devs)), float(np.sqrt(np.sum(np.square(ses)))) / len(ses))
            deviation[f.id][eps] = dev
            rows.append(record(NAME, "relative_deviation", dev.value, "exploratory", eps=eps, parameter=f.id,
                               stderr=dev.stderr))

    if poisson or len(cfg.ladder.eps) < 2:
        return rows
    largest, smallest = max(cfg.ladder.eps), min(cfg.ladder.eps)
    for f in fs:
        outcome, note = trend_outcome(deviation[f.id][smallest], deviation[f.id][largest], tol.n_sigma)
        rows.append(record(NAME, "deviation_trend", deviation[f.id][smallest].value, outcome, eps=smallest,
                           parameter=f.id, stderr=deviation[f.id][smallest].stderr,
                           target=deviation[f.id][largest].value, note=note))
    return rows
