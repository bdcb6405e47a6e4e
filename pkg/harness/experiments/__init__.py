# harness/experiments/__init__.py
# Purpose: registry of experiment ids -> run(cfg, ctx) callables.

from __future__ import annotations

from typing import Dict, List

from harness.experiments import (
    beta_derivative,
    coercivity,
    curvature,
    dirichlet,
    generator_gap,
    increments,
    oracle_mc,
    ou_comparison,
    timeavg,
    variance,
)
from harness.ports import ExperimentRunner
from harness.schemas import UnknownExperimentError

REGISTRY: Dict[str, ExperimentRunner] = {
    m.NAME: m.run
    for m in (
        variance,
        dirichlet,
        increments,
        ou_comparison,
        generator_gap,
        timeavg,
        oracle_mc,
        beta_derivative,
        curvature,
        coercivity,
    )
}


def get_experiment(experiment_id: str) -> ExperimentRunner:
    try:
        return REGISTRY[experiment_id]
    except KeyError:
        raise UnknownExperimentError(experiment_id, list(REGISTRY)) from None


def experiment_ids() -> List[str]:
    return sorted(REGISTRY)
