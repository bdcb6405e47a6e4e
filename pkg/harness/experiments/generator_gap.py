"""
harness/experiments/generator_gap.py

Mean square of (H − H_ε)⟨f, ·⟩ over μ_ε samples, per ε, against the β² leading term of
R_φ(β)·‖Δf‖₀².

- Samples with a pair below the hard floor are excluded and counted; an exclusion rate
  above tolerance.close_pair_rate fails the run.
- Every ladder point also evaluates the φ = 0 control on ideal-gas samples (gap exactly 0).
- Plateau rule: the per-ε estimates agree within n_sigma, or their relative spread stays
  under tolerance.plateau_spread.
"""

from __future__ import annotations

import logging
import math
from typing import List

import numpy as np

from fluctuations.errors import ClosePairError
from fluctuations.expansion import leading_remainder
from fluctuations.gibbs import GibbsParams
from fluctuations.langevin import generator_gap_linear
from fluctuations.oulimit import OUParams
from fluctuations.potentials import PairPotential
from fluctuations.stats import Estimate, mean_estimate
from harness.experiments.common import RunContext, band_outcome, gate, record
from harness.factory import (
    STREAM_CONTROL,
    build_coefficients,
    build_gibbs_params,
    build_potential,
    build_test_functions,
)
from harness.schemas import ConfigError, ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

NAME = "generator-gap"


def gap_samples(configs, eps: float, gp: GibbsParams, f, ou: OUParams):
    """Gap values on the usable samples and the number of samples excluded for close pairs."""
    values, excluded = [], 0
    for c in configs:
        try:
            values.append(generator_gap_linear(c, eps, gp, f, ou))
        except ClosePairError:
            excluded += 1
    return np.asarray(values, dtype=float), excluded


def _zero_control(cfg: ExperimentConfig, ctx: RunContext, eps_index: int, eps: float, fs) -> List:
    zero = PairPotential.zero(cfg.state.d)
    gp = build_gibbs_params(cfg, eps, zero)
    ou = OUParams.poisson(cfg.state.z)
    configs = ctx.sample(gp, eps_index, stream=STREAM_CONTROL, label="zero_control")
    rows = []
    for f in fs:
        values, _ = gap_samples(configs, eps, gp, f, ou)
        worst = float(np.max(np.abs(values))) if len(values) else 0.0
        rows.append(record(NAME, "zero_control", worst, gate(worst < cfg.tolerance.gap_abs), eps=eps,
                           parameter=f.id, target=0.0, note=f"max |gap| over {len(values)} samples"))
    return rows


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    phi = build_potential(cfg.potential, cfg.state.d)
    if not phi.is_isotropic:
        raise ConfigError("potential.kind", "generator-gap needs an isotropic potential")
    fs = build_test_functions(cfg)
    coeffs = build_coefficients(cfg, phi)
    ou = OUParams.from_coefficients(coeffs)
    tol = cfg.tolerance
    lo, hi = tol.ratio_band
    ctx.note("coefficients", coeffs.as_row())

    if phi.is_zero or cfg.state.beta == 0.0:
        remainder = 0.0
    else:
        try:
            remainder = leading_remainder(phi, cfg.state.beta, cfg.expansion.target)
        except ValueError as exc:
            raise ConfigError("potential", f"leading remainder unavailable: {exc}") from exc
    ctx.note("leading_remainder", {"value": remainder, "convention": cfg.expansion.target})

    rows: List[ResultRecord] = []
    plateau = {f.id: [] for f in fs}
    for i, eps in enumerate(cfg.ladder.eps):
        gp = build_gibbs_params(cfg, eps, phi)
        with ctx.timed(f"sample eps={eps:g}"):
            configs = ctx.sample(gp, i)
        for f in fs:
            values, excluded = gap_samples(configs, eps, gp, f, ou)
            rate = excluded / max(len(configs), 1)
            if rate > 0:
                logger.warning("eps=%g %s: excluded %d/%d samples with close pairs", eps, f.id, excluded, len(configs))
            rows.append(record(NAME, "close_pair_rate", rate, gate(rate <= tol.close_pair_rate), eps=eps,
                               parameter=f.id, target=tol.close_pair_rate))
            if gp.is_poisson:
                worst = float(np.max(np.abs(values))) if len(values) else 0.0
                rows.append(record(NAME, "gap_abs", worst, gate(worst < tol.gap_abs), eps=eps, parameter=f.id,
                                   target=0.0, note="ideal gas"))
                continue
            est = mean_estimate(values ** 2)
            target = remainder * f.lap_norm_sq
            plateau[f.id].append(est)
            rows.append(record(NAME, "mean_square_gap", est.value, "exploratory", eps=eps, parameter=f.id,
                               stderr=est.stderr, target=target, note=f"n={len(values)}"))
            if target > 0:
                ratio = est.value / target
                rows.append(record(NAME, "ratio", ratio, band_outcome(ratio, est.stderr / target, lo, hi, tol.n_sigma),
                                   eps=eps, parameter=f.id, stderr=est.stderr / target, target=1.0,
                                   note=f"band [{lo:g}, {hi:g}] ({cfg.expansion.target})"))
        if not gp.is_poisson:
            rows.extend(_zero_control(cfg, ctx, i, eps, fs))

    for f in fs:
        ests: List[Estimate] = plateau[f.id]
        if len(ests) < 2:
            continue
        vals = np.array([e.value for e in ests])
        ses = np.array([e.stderr for e in ests])
        spread = float(vals.max() - vals.min())
        resolved = spread <= tol.n_sigma * math.hypot(ses[vals.argmax()], ses[vals.argmin()])
        relative = spread / float(np.mean(vals)) if np.mean(vals) > 0 else math.inf
        positive = bool(np.all(vals - tol.n_sigma * ses > 0))
        ok = positive and (resolved or relative <= tol.plateau_spread)
        rows.append(record(NAME, "plateau", float(np.mean(vals)), gate(ok), parameter=f.id,
                           stderr=float(np.sqrt(np.sum(ses ** 2))) / len(ses),
                           note=f"relative spread {relative:.3g}; positive={positive}"))
    return rows
