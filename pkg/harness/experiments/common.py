"""
harness/experiments/common.py

Shared plumbing for the acceptance experiments.
- RunContext: seeded sampling, dynamics replicas, manifest notes, timings and extra tables.
- Outcome rules shared by several experiments (band, trend, threshold, χ consistency).
- A process pool whose results come back in task order, so merging is by (ε, seed).
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from fluctuations.configuration import Configuration
from fluctuations.gibbs import EnsembleStats, GibbsParams, run_chain, sample_chains
from fluctuations.langevin import DynamicsParams, Observer, run_scaled
from fluctuations.scaling import FieldSeries, TestFunction
from fluctuations.stats import Estimate
from harness.factory import STREAM_DYNAMICS, STREAM_SAMPLE, build_gibbs_params, seed_for
from harness.schemas import ConfigError, ExperimentConfig, Outcome, ResultRecord

logger = logging.getLogger(__name__)


def run_parallel(fn: Callable[[Any], Any], tasks: Sequence[Any], workers: int = 1) -> List[Any]:
    """map(fn, tasks) in task order; a process pool when workers > 1."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def record_stride(cfg: ExperimentConfig, eps: float) -> int:
    dyn = cfg.dynamics
    stride = int(round(dyn.record_interval / (dyn.dt * eps ** 2)))
    if stride < 1:
        raise ConfigError("dynamics.record_interval",
                          f"record_interval {dyn.record_interval:g} is shorter than one step at eps={eps:g}")
    return stride


def lag_steps(cfg: ExperimentConfig, interval: float) -> List[int]:
    """Lags as multiples of the record interval; each must land on the recording grid."""
    out = []
    for lag in cfg.dynamics.lags:
        k = int(round(lag / interval))
        if k < 1 or not math.isclose(k * interval, lag, rel_tol=1e-6):
            raise ConfigError("dynamics.lags", f"lag {lag:g} is not a positive multiple of the record interval {interval:g}")
        out.append(k)
    return out


def replica_series(args) -> FieldSeries:
    cfg, eps_index, eps, replica, fs, rho1, observers = args
    gp = build_gibbs_params(cfg, eps)
    mc = cfg.monte_carlo
    start = run_chain(gp, 1, mc.thinning, mc.burn_in, seed_for(cfg.seeds.base, eps_index, replica, STREAM_SAMPLE),
                      method=mc.method).configurations[0]
    dp = DynamicsParams(
        dt=cfg.dynamics.dt,
        horizon=cfg.dynamics.horizon,
        eps=eps,
        record_stride=record_stride(cfg, eps),
        seed=seed_for(cfg.seeds.base, eps_index, replica, STREAM_DYNAMICS),
    )
    return run_scaled(start, dp, gp, fs, rho1=rho1, observers=observers)


@dataclass
class RunContext:
    cfg: ExperimentConfig
    workers: int = 1
    bootstrap_resamples: int = 200
    manifest: Dict[str, Any] = field(default_factory=dict)
    timings: List[Dict[str, Any]] = field(default_factory=list)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)

    def note(self, key: str, value: Any) -> None:
        self.manifest[key] = value

    def timing(self, label: str, seconds: float) -> None:
        self.timings.append({"label": label, "seconds": round(float(seconds), 3)})

    @contextmanager
    def timed(self, label: str) -> Iterator[None]:
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timing(label, time.perf_counter() - t0)

    def table(self, name: str, rows: Sequence[Mapping[str, Any]]) -> None:
        self.tables.setdefault(name, []).extend(dict(r) for r in rows)

    # ---------------- sampling ----------------
    def sample(self, p: GibbsParams, eps_index: int, chains: int = 1, stream: int = STREAM_SAMPLE,
               label: str = "sampling") -> List[Configuration]:
        """Samples from `chains` independent chains, concatenated in seed order."""
        mc = self.cfg.monte_carlo
        seeds = [seed_for(self.cfg.seeds.base, eps_index, r, stream) for r in range(chains)]
        runs = sample_chains(p, seeds, mc.samples, mc.thinning, mc.burn_in, method=mc.method, workers=self.workers)
        self.note(f"{label}.eps_index_{eps_index}", {
            "seeds": seeds,
            "method": [r.method for r in runs],
            "step_size": [r.step_size for r in runs],
            "moves": [r.move_stats.as_dict() for r in runs],
            "stability_violations": sum(r.stability_violations for r in runs),
        })
        if any(r.stability_violations for r in runs):
            logger.warning("eps_index=%d: %d stability-surrogate violations", eps_index,
                           sum(r.stability_violations for r in runs))
        return [c for r in runs for c in r.configurations]

    def replicas(self, eps_index: int, eps: float, fs: Sequence[TestFunction], rho1: float,
                 observers: Optional[Mapping[str, Observer]] = None) -> List[FieldSeries]:
        """Equilibrium-started dynamics replicas at one ladder point, in replica order."""
        n = self.cfg.dynamics.replicas
        tasks = [(self.cfg, eps_index, eps, r, list(fs), rho1, dict(observers or {})) for r in range(n)]
        series = run_parallel(replica_series, tasks, self.workers)
        self.note(f"dynamics.eps_index_{eps_index}", {
            "seeds": [int(s.meta["seed"]) for s in series],
            "record_stride": record_stride(self.cfg, eps),
            "records": len(series[0].times) if series else 0,
        })
        return series


# ---------------- outcome rules ----------------
def gate(ok: bool) -> Outcome:
    return "pass" if ok else "fail"


def within_outcome(est: Estimate, target: float, n_sigma: float, floor: float = 0.0) -> Outcome:
    if not math.isfinite(est.stderr):
        return "inconclusive"
    return gate(est.within(target, n_sigma, floor))


def chi_consistency(experiment: str, stats: EnsembleStats, n_sigma: float, *, eps: float,
                    floor: float = 0.0) -> ResultRecord:
    """χ from the integrated pair correlation against Var(n)/|Λ|; `floor` bounds the part of the box the bins miss."""
    diff = Estimate(stats.chi.value - stats.chi_fluct.value, math.hypot(stats.chi.stderr, stats.chi_fluct.stderr))
    return record(experiment, "chi_consistency", diff.value, within_outcome(diff, 0.0, n_sigma, floor), eps=eps,
                  stderr=diff.stderr, target=0.0,
                  note=f"chi={stats.chi.value:.6g} chi_fluct={stats.chi_fluct.value:.6g}")


def band_outcome(value: float, stderr: float, lo: float, hi: float, n_sigma: float) -> Outcome:
    """pass when the whole n_sigma interval is inside [lo, hi], fail when it is outside, else inconclusive."""
    if not math.isfinite(stderr):
        return "inconclusive"
    low, high = value - n_sigma * stderr, value + n_sigma * stderr
    if lo <= low and high <= hi:
        return "pass"
    if high < lo or low > hi:
        return "fail"
    return "inconclusive"


def trend_outcome(gap_small: Estimate, gap_large: Estimate, n_sigma: float) -> Tuple[Outcome, str]:
    """
    Shrinking-gap rule between the largest and the smallest ε of a ladder.

    inconclusive when the combined stderr exceeds the gap at the largest ε (nothing to resolve),
    pass when the gap at the smallest ε is no larger within n_sigma, fail otherwise.
    """
    se = math.hypot(gap_small.stderr, gap_large.stderr)
    if not math.isfinite(se) or se >= max(gap_large.value, 1e-300):
        return "inconclusive", f"stderr {se:.3g} >= gap {gap_large.value:.3g}"
    ok = gap_small.value <= gap_large.value + n_sigma * se
    return gate(ok), f"gap {gap_large.value:.4g} -> {gap_small.value:.4g} (se {se:.3g})"


def replica_estimate(values: Sequence[float]) -> Estimate:
    """Mean over independent replicas with stderr std/√R."""
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return Estimate(float(arr.mean()) if len(arr) else math.nan, math.nan)
    return Estimate(float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr))))


def record(experiment: str, rule: str, estimate: float, outcome: Outcome, *, eps: Optional[float] = None,
           parameter: str = "", stderr: float = math.nan, target: Optional[float] = None,
           note: str = "") -> ResultRecord:
    return ResultRecord(
        experiment=experiment, rule=rule, eps=eps, parameter=parameter, estimate=float(estimate),
        stderr=float(stderr), target=None if target is None else float(target), outcome=outcome, note=note,
    )
