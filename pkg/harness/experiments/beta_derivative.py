# harness/experiments/beta_derivative.py
# Purpose: finite-volume β-derivative identity for correlation functions, checked point by point.

from __future__ import annotations

import logging
from typing import List

import numpy as np

from fluctuations.errors import OracleTractabilityError
from fluctuations.oracle import beta_derivative_check
from harness.experiments.common import RunContext, gate, record
from harness.factory import build_oracle_spec, build_potential
from harness.schemas import ConfigError, ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

NAME = "beta-derivative"


def default_points(length: float, d: int) -> List[List[List[float]]]:
    """One singleton and one pair inside the box."""
    c = length / 2.0
    shift = [0.3] + [0.0] * (d - 1)
    return [[[c] * d], [[c - s for s in shift], [c + s for s in shift]]]


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    spec = build_oracle_spec(cfg)
    oc = cfg.oracle
    d = cfg.state.d
    phi = build_potential(cfg.potential, d)
    points = oc.points or default_points(spec.length, d)
    rows: List[ResultRecord] = []
    for k, eta in enumerate(points):
        if any(len(x) != d for x in eta):
            raise ConfigError(f"oracle.points.{k}", f"every point needs {d} coordinates")
        with ctx.timed(f"eta {k}"):
            try:
                check = beta_derivative_check(spec, phi, cfg.state.z, cfg.state.beta, np.asarray(eta, dtype=float), h=oc.h)
            except OracleTractabilityError as exc:
                raise ConfigError("oracle", str(exc)) from exc
            except ValueError as exc:
                raise ConfigError(f"oracle.points.{k}", str(exc)) from exc
        logger.info("eta size %d: lhs=%.10g rhs=%.10g rel=%.3e", len(eta), check.lhs, check.rhs, check.rel_error)
        rows.append(record(NAME, "beta_derivative", check.lhs, gate(check.rel_error < cfg.tolerance.rel_error),
                           parameter=f"|eta|={len(eta)}#{k}", target=check.rhs,
                           note=f"rel_error={check.rel_error:.3e}"))
    return rows
