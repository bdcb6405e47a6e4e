# harness/experiments/curvature.py
# Purpose: second β-derivatives at β = 0 of D_φ and (ρ⁽¹⁾)²/χ by finite differences of oracle-backed ρ⁽²⁾,
# against their closed forms in ∫φ and ∫(x¹∂₁φ)²; the analytic approximant is reported alongside.

from __future__ import annotations

import logging
import math
from typing import List

from fluctuations.errors import OracleTractabilityError
from fluctuations.expansion import (
    CurvatureEstimate,
    Rho2Approximant,
    approximant,
    coefficient_table,
    curvature_at_zero,
    curvature_finite_difference,
)
from fluctuations.oracle import oracle_system
from fluctuations.potentials import PairPotential
from harness.experiments.common import RunContext, gate, record
from harness.factory import build_oracle_spec, build_potential, potential_id
from harness.schemas import ConfigError, ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

NAME = "curvature"


def _relative(estimate: float, target: float) -> float:
    if target == 0.0:
        return abs(estimate)
    return abs(estimate - target) / abs(target)


def _oracle_curvature(cfg: ExperimentConfig, ctx: RunContext, phi: PairPotential,
                      betas: List[float]) -> CurvatureEstimate:
    spec = build_oracle_spec(cfg)
    if spec.boundary != "periodic":
        raise ConfigError("oracle.boundary", "the pair profile is taken on a torus; use periodic")
    reach = 2.0 * phi.interaction_range
    if spec.length < 2.0 * reach:
        raise ConfigError("oracle.length", f"box side {spec.length:g} must be at least {2.0 * reach:g} "
                                           "so the pair profile covers twice the interaction range")
    z = cfg.state.z
    try:
        with ctx.timed("finite differences (oracle)"):
            fd = curvature_finite_difference(
                phi, lambda b: Rho2Approximant.from_oracle(oracle_system(spec, phi, b, z), r_max=reach), betas)
        flagged = [b for b in betas if oracle_system(spec, phi, b, z).flagged]
    except (OracleTractabilityError, ValueError) as exc:
        raise ConfigError("oracle", str(exc)) from exc
    ctx.note("oracle", {"length": spec.length, "n_max": spec.n_max, "quad_points": spec.quad_points,
                        "truncation": spec.truncation, "flagged_betas": flagged})
    return fd


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    if not math.isclose(cfg.state.z, 1.0):
        raise ConfigError("state.z", "the curvature closed forms are stated at activity z = 1")
    order = "boltzmann" if cfg.expansion.source == "boltzmann" else "cluster"
    phi = build_potential(cfg.potential, cfg.state.d)
    try:
        exact = curvature_at_zero(phi)
    except ValueError as exc:
        raise ConfigError("potential", f"curvature needs finite moments: {exc}") from exc
    h = cfg.expansion.fd_step
    betas = [-h, 0.0, h]
    fd = _oracle_curvature(cfg, ctx, phi, betas)
    with ctx.timed(f"finite differences ({order})"):
        analytic = curvature_finite_difference(phi, lambda b: approximant(phi, b, order, cfg.state.z), betas)
    ctx.note("stencil", {"betas": betas, "gated": "oracle_interpolated", "cross_check": order})

    tol = cfg.tolerance.curvature_rel
    rows: List[ResultRecord] = []
    targets = (("d2_D", exact.d2_D), ("d2_compress", exact.d2_compress))
    for rule, target in targets:
        est = getattr(fd, rule)
        rel = _relative(est, target)
        rows.append(record(NAME, rule, est, gate(rel <= tol), parameter="oracle", target=target,
                           note=f"relative error {rel:.3e}"))
    rows.append(record(NAME, "d2_R", fd.d2_R, "exploratory", parameter="oracle", target=exact.d2_R,
                       note="closed form uses the 2∫(x¹∂₁φ)² convention"))
    for rule, target in targets:
        est = getattr(analytic, rule)
        rows.append(record(NAME, rule, est, "exploratory", parameter=order, target=target,
                           note=f"relative error {_relative(est, target):.3e}"))

    table_betas = sorted(set(cfg.expansion.betas) | {b for b in betas if b >= 0.0})
    with ctx.timed("coefficient table"):
        ctx.table("coefficients", coefficient_table(phi, potential_id(cfg), table_betas, z=cfg.state.z))
    return rows
