# harness/experiments/coercivity.py
# Purpose: both sides of the coercivity identity for F = ⟨f, ·⟩ over Gibbs samples on the torus of side L₀.

from __future__ import annotations

import logging
from typing import List

from fluctuations.errors import ClosePairError
from fluctuations.expansion import coercivity_sides, poisson_coercivity
from harness.experiments.common import RunContext, gate, record, within_outcome
from harness.factory import build_gibbs_params, build_potential, build_test_functions
from harness.schemas import ConfigError, ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

NAME = "coercivity"


def run(cfg: ExperimentConfig, ctx: RunContext) -> List[ResultRecord]:
    if cfg.ladder.eps != [1.0]:
        logger.info("coercivity runs at eps = 1 only; ignoring ladder %s", cfg.ladder.eps)
    phi = build_potential(cfg.potential, cfg.state.d)
    fs = build_test_functions(cfg)
    gp = build_gibbs_params(cfg, 1.0, phi)
    n_sigma = cfg.tolerance.n_sigma
    with ctx.timed("sample"):
        configs = ctx.sample(gp, 0)

    rows: List[ResultRecord] = []
    for f in fs:
        try:
            sides = coercivity_sides(f, configs, phi, gp.beta)
        except ClosePairError as exc:
            raise ConfigError("monte_carlo", f"sampler produced a pair below the hard floor: {exc}") from exc
        rows.append(record(NAME, "identity", sides.lhs.value, gate(sides.agrees(n_sigma)), eps=1.0, parameter=f.id,
                           stderr=sides.combined_stderr, target=sides.rhs.value,
                           note=f"rhs stderr {sides.rhs.stderr:.3g}; n={sides.n_samples}"))
        rows.append(record(NAME, "difference", sides.difference.value,
                           within_outcome(sides.difference, 0.0, n_sigma), eps=1.0, parameter=f.id,
                           stderr=sides.difference.stderr, target=0.0))
        if gp.is_poisson:
            lhs, rhs = poisson_coercivity(f, gp.z)
            rows.append(record(NAME, "poisson_lhs", sides.lhs.value, within_outcome(sides.lhs, lhs, n_sigma),
                               eps=1.0, parameter=f.id, stderr=sides.lhs.stderr, target=lhs))
            rows.append(record(NAME, "poisson_rhs", sides.rhs.value,
                               within_outcome(sides.rhs, rhs, n_sigma),
                               eps=1.0, parameter=f.id, stderr=sides.rhs.stderr, target=rhs))
    return rows
