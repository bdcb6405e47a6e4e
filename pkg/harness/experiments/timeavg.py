# harness/experiments/timeavg.py
# Purpose: exploratory probe of the time-averaged generator gap along equilibrium trajectories.
# V_ε(f, t, s) = ∫_t^{t+s} G'(⟨f, X(u)⟩)·(H − H_ε)⟨f, ·⟩(X(u)) du for G(x) = x and G(x) = sin x.
# Nothing here gates acceptance; every row is exploratory.

from __future__ import annotations

import functools
import logging
from typing import Dict, List

import numpy as np
from scipy import integrate

from fluctuations.gibbs import GibbsParams
from fluctuations.langevin import generator_gap_linear
from fluctuations.oulimit import OUParams
from fluctuations.scaling import ScaledField, TestFunction
from fluctuations.stats import Estimate, mean_estimate
from harness.experiments.common import RunContext, record, trend_outcome
from harness.factory import build_coefficients, build_gibbs_params, build_potential, build_test_functions
from harness.schemas import ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

NAME = "timeavg-probe"
GAP = "gap"
DERIVATIVES = {"G=x": np.ones_like, "G=sin": np.cos}


def gap_observer(sf: ScaledField, gp: GibbsParams, f: TestFunction, ou: OUParams) -> float:
    return generator_gap_linear(sf.configuration, sf.eps, gp, f, ou)


def window_integrals(times: np.ndarray, a: np.ndarray, gap: np.ndarray, window: float, g_prime) -> np.ndarray:
    """Trapezoid ∫ G'(a)·gap over every window [t_j, t_j + window] on the recording grid."""
    if window <= 0.0 or len(times) < 2:
        return np.zeros(max(len(times), 1))
    dt = float(times[1] - times[0])
    k = int(round(window / dt))
    if k < 1 or k >= len(times):
        raise ValueError(f"window {window:g} does not fit the series (record interval {dt:g}, {len(times)} records)")
    y = g_prime(a) * gap
    return np.array([integrate.trapezoid(y[j:j + k + 1], dx=dt) for j in range(len(times) - k)])


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    phi = build_potential(cfg.potential, cfg.state.d)
    fs = build_test_functions(cfg)
    f = fs[0]
    coeffs = build_coefficients(cfg, phi)
    ou = OUParams.from_coefficients(coeffs)
    window = cfg.dynamics.window

    rows: List[ResultRecord] = []
    probes: Dict[str, Dict[float, Estimate]] = {label: {} for label in DERIVATIVES}
    for i, eps in enumerate(cfg.ladder.eps):
        gp = build_gibbs_params(cfg, eps, phi)
        observer = functools.partial(gap_observer, gp=gp, f=f, ou=ou)
        with ctx.timed(f"dynamics eps={eps:g}"):
            series = ctx.replicas(i, eps, [f], ou.rho1, observers={GAP: observer})
        for label, g_prime in DERIVATIVES.items():
            v = np.concatenate([
                window_integrals(s.times, s.column(f.id), s.column(GAP), window, g_prime) for s in series
            ])
            est = mean_estimate(np.abs(v))
            probes[label][eps] = est
            rows.append(record(NAME, "mean_abs_V", est.value, "exploratory", eps=eps, parameter=f"{f.id} {label}",
                               stderr=est.stderr, note=f"window={window:g}, windows={len(v)}"))

    if len(cfg.ladder.eps) >= 2:
        largest, smallest = max(cfg.ladder.eps), min(cfg.ladder.eps)
        for label in DERIVATIVES:
            verdict, note = trend_outcome(probes[label][smallest], probes[label][largest], cfg.tolerance.n_sigma)
            rows.append(record(NAME, "trend", probes[label][smallest].value, "exploratory", eps=smallest,
                               parameter=f"{f.id} {label}", stderr=probes[label][smallest].stderr,
                               target=probes[label][largest].value, note=f"{verdict}: {note}"))
    return rows
