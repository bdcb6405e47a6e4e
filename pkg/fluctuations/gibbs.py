"""
fluctuations/gibbs.py

Grand-canonical Metropolis–Hastings sampler for the finite-volume Gibbs measure
exp(−βE) dπ_z on a periodic torus, and estimators for ρ⁽¹⁾, ρ⁽²⁾, u⁽²⁾ and χ.

- Moves: insert / delete / translate with configurable probabilities (default
  0.25 / 0.25 / 0.5). The translate step is tuned towards ~40% acceptance during
  burn-in only and frozen afterwards.
- `max_particles` restricts the target to configurations with at most N particles
  (the capped ensemble the quadrature oracle computes exactly).
- Poisson targets (φ = 0 or β = 0) can be sampled exactly (`method="exact"`, the
  default under `method="auto"`); `method="mcmc"` always runs the chain.
- Error bars: non-overlapping block bootstrap, block = 5 × integrated
  autocorrelation time of the particle-number series.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats as sps

from fluctuations.configuration import (
    Configuration,
    Torus,
    check_stability,
    pair_displacements,
    particle_energy,
    total_energy,
)
from fluctuations.potentials import PairPotential, RegimeReport, regime_check, sphere_area
from fluctuations.stats import Estimate, block_bootstrap, integrated_autocorr_time

logger = logging.getLogger(__name__)

MOVES = ("insert", "delete", "translate")
RngLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


@dataclass(frozen=True)
class GibbsParams:
    beta: float
    z: float
    torus: Torus
    potential: PairPotential
    max_particles: Optional[int] = None
    move_probabilities: Tuple[float, float, float] = (0.25, 0.25, 0.5)
    step_size: float = 0.5
    target_acceptance: float = 0.4

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.z <= 0:
            raise ValueError(f"z must be > 0, got {self.z}")
        if self.max_particles is not None and self.max_particles < 0:
            raise ValueError(f"max_particles must be >= 0, got {self.max_particles}")
        probs = tuple(float(p) for p in self.move_probabilities)
        if len(probs) != 3 or min(probs) < 0 or not math.isclose(sum(probs), 1.0):
            raise ValueError(f"move_probabilities must be three non-negative numbers summing to 1, got {probs}")
        if probs[0] == 0 or probs[1] == 0:
            raise ValueError("insert and delete probabilities must both be > 0")
        object.__setattr__(self, "move_probabilities", probs)
        if self.step_size <= 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        self.torus.validate_for(self.potential)

    @property
    def is_poisson(self) -> bool:
        return self.potential.is_zero or self.beta == 0.0

    @property
    def volume(self) -> float:
        return self.torus.volume

    def regime(self) -> RegimeReport:
        return regime_check(self.potential, self.beta, self.z)


@dataclass
class MoveStats:
    proposed: Dict[str, int] = field(default_factory=lambda: {m: 0 for m in MOVES})
    accepted: Dict[str, int] = field(default_factory=lambda: {m: 0 for m in MOVES})

    def record(self, move: str, accepted: bool) -> None:
        self.proposed[move] += 1
        if accepted:
            self.accepted[move] += 1

    def rate(self, move: str) -> float:
        n = self.proposed[move]
        return self.accepted[move] / n if n else math.nan

    def as_dict(self) -> Dict[str, Dict[str, int]]:
        return {"proposed": dict(self.proposed), "accepted": dict(self.accepted)}


def acceptance_log_ratio(move: str, n: int, z: float, volume: float, beta: float, delta_e: float,
                         p_insert: float = 0.25, p_delete: float = 0.25) -> float:
    """
    log of the Metropolis–Hastings ratio for a move out of a state with n particles.

    insert:    z|Λ|/(n+1) · e^{−βΔE} · p_delete/p_insert
    delete:    n/(z|Λ|)   · e^{−βΔE} · p_insert/p_delete
    translate: e^{−βΔE}
    """
    if beta == 0.0:
        boltz = 0.0
    elif math.isnan(delta_e):
        return -math.inf
    else:
        boltz = -beta * delta_e
    if move == "insert":
        return math.log(z * volume / (n + 1)) + math.log(p_delete / p_insert) + boltz
    if move == "delete":
        if n == 0:
            return -math.inf
        return math.log(n / (z * volume)) + math.log(p_insert / p_delete) + boltz
    if move == "translate":
        return boltz
    raise ValueError(f"unknown move {move!r}; expected one of {MOVES}")


class GCMCSampler:
    """One chain: owns the RNG stream, the current translate step and move statistics."""

    ADAPT_EVERY = 200

    def __init__(self, params: GibbsParams, rng: RngLike = None):
        self.params = params
        self.rng = np.random.default_rng(rng)
        self.step_size = float(params.step_size)
        self.stats = MoveStats()
        self._window = [0, 0]

    def _interacting(self) -> bool:
        return not self.params.is_poisson

    def _ensure_index(self, state: Configuration) -> Configuration:
        r = self.params.potential.interaction_range
        if self._interacting() and state.cells.cutoff < r:
            return state.with_cutoff(r)
        return state

    def _accept(self, log_a: float) -> bool:
        u = self.rng.random()
        return log_a >= 0.0 or u < math.exp(log_a)

    def step(self, state: Configuration) -> Configuration:
        """One MH move on `state` (mutated in place and returned)."""
        p = self.params
        u = self.rng.random()
        p_ins, p_del, _ = p.move_probabilities
        if u < p_ins:
            self._insert(state)
        elif u < p_ins + p_del:
            self._delete(state)
        else:
            self._translate(state)
        return state

    def _insert(self, state: Configuration) -> None:
        p = self.params
        x = p.torus.random_points(self.rng, 1)[0]
        if p.max_particles is not None and state.n >= p.max_particles:
            self.stats.record("insert", False)
            return
        de = particle_energy(state, p.potential, x) if self._interacting() else 0.0
        log_a = acceptance_log_ratio("insert", state.n, p.z, p.volume, p.beta, de, *p.move_probabilities[:2])
        ok = self._accept(log_a)
        if ok:
            state.add(x)
        self.stats.record("insert", ok)

    def _delete(self, state: Configuration) -> None:
        p = self.params
        if state.n == 0:
            self.stats.record("delete", False)
            return
        i = int(self.rng.integers(state.n))
        de = -particle_energy(state, p.potential, state.positions[i], exclude=i) if self._interacting() else 0.0
        log_a = acceptance_log_ratio("delete", state.n, p.z, p.volume, p.beta, de, *p.move_probabilities[:2])
        ok = self._accept(log_a)
        if ok:
            state.remove(i)
        self.stats.record("delete", ok)

    def _translate(self, state: Configuration) -> None:
        p = self.params
        if state.n == 0:
            self.stats.record("translate", False)
            return
        i = int(self.rng.integers(state.n))
        old = state.positions[i].copy()
        new = p.torus.wrap(old + self.step_size * self.rng.standard_normal(p.torus.d))
        if self._interacting():
            e_new = particle_energy(state, p.potential, new, exclude=i)
            e_old = particle_energy(state, p.potential, old, exclude=i)
            de = e_new - e_old if not (math.isinf(e_new) and math.isinf(e_old)) else math.nan
        else:
            de = 0.0
        ok = self._accept(acceptance_log_ratio("translate", state.n, p.z, p.volume, p.beta, de))
        if ok:
            state.move(i, new)
        self.stats.record("translate", ok)
        self._window[0] += 1
        self._window[1] += int(ok)

    def adapt(self) -> None:
        """Nudge the translate step towards the target acceptance (burn-in only)."""
        tried, took = self._window
        if tried < self.ADAPT_EVERY:
            return
        rate = took / tried
        factor = math.exp(rate - self.params.target_acceptance)
        self.step_size = float(np.clip(self.step_size * factor, 1e-3, self.params.torus.L / 2.0))
        self._window = [0, 0]

    def initial_state(self) -> Configuration:
        """Poisson draw with overlapping points (infinite pair energy) discarded."""
        p = self.params
        state = Configuration.empty(p.torus, p.potential.interaction_range if self._interacting() else 0.0)
        for x in _poisson_points(p, self.rng):
            if self._interacting() and math.isinf(particle_energy(state, p.potential, x)):
                continue
            state.add(x)
        return state

    def run(self, n_samples: int, thinning: int, burn_in: int,
            initial: Optional[Configuration] = None) -> List[Configuration]:
        if n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {n_samples}")
        if thinning < 1 or burn_in < 0:
            raise ValueError(f"need thinning >= 1 and burn_in >= 0, got {thinning}, {burn_in}")
        state = self._ensure_index(initial.copy()) if initial is not None else self.initial_state()
        for k in range(burn_in):
            self.step(state)
            if k % 50 == 49:
                self.adapt()
        self.stats = MoveStats()
        out: List[Configuration] = []
        for _ in range(n_samples):
            for _ in range(thinning):
                self.step(state)
            out.append(state.copy())
        logger.debug(
            "gcmc: %d samples, acceptance ins=%.3f del=%.3f tr=%.3f, step=%.4g",
            n_samples, self.stats.rate("insert"), self.stats.rate("delete"),
            self.stats.rate("translate"), self.step_size,
        )
        return out


def _poisson_points(p: GibbsParams, rng: np.random.Generator) -> np.ndarray:
    mean = p.z * p.volume
    if p.max_particles is None:
        n = int(rng.poisson(mean))
    else:
        support = np.arange(p.max_particles + 1)
        pmf = sps.poisson.pmf(support, mean)
        n = int(rng.choice(support, p=pmf / pmf.sum()))
    return p.torus.random_points(rng, n)


def gcmc_step(state: Configuration, p: GibbsParams, rng: RngLike) -> Configuration:
    """Single move; the state is updated in place (rejections leave it untouched)."""
    sampler = GCMCSampler(p, rng)
    return sampler.step(sampler._ensure_index(state))


@dataclass
class EnsembleRun:
    configurations: List[Configuration]
    move_stats: MoveStats
    step_size: float
    method: str
    seed: Optional[int] = None
    stability_violations: int = 0


def run_chain(p: GibbsParams, n_samples: int, thinning: int, burn_in: int, rng: RngLike = None,
              initial: Optional[Configuration] = None, method: str = "auto") -> EnsembleRun:
    if method not in ("auto", "exact", "mcmc"):
        raise ValueError(f"unknown sampling method {method!r}")
    gen = np.random.default_rng(rng)
    seed = rng if isinstance(rng, int) else None
    if method == "exact" and not p.is_poisson:
        raise ValueError("exact sampling is only available for Poisson targets (phi = 0 or beta = 0)")
    if method == "exact" or (method == "auto" and p.is_poisson and initial is None):
        configs = [Configuration(p.torus, _poisson_points(p, gen)) for _ in range(n_samples)]
        return EnsembleRun(configs, MoveStats(), p.step_size, "exact", seed)
    sampler = GCMCSampler(p, gen)
    configs = sampler.run(n_samples, thinning, burn_in, initial)
    violations = 0
    if not p.is_poisson and p.potential.stability_constant >= 0:
        violations = sum(not check_stability(c, p.potential) for c in configs)
    return EnsembleRun(configs, sampler.stats, sampler.step_size, "mcmc", seed, violations)


def sample_ensemble(p: GibbsParams, n_samples: int, thinning: int, burn_in: int, rng: RngLike = None,
                    initial: Optional[Configuration] = None, method: str = "auto") -> List[Configuration]:
    """Deterministic given (seed, parameters): burn-in discarded, a snapshot every `thinning` steps."""
    return run_chain(p, n_samples, thinning, burn_in, rng, initial, method).configurations


def _chain_worker(args) -> EnsembleRun:
    p, n_samples, thinning, burn_in, seed, method = args
    return run_chain(p, n_samples, thinning, burn_in, int(seed), method=method)


def sample_chains(p: GibbsParams, seeds: Sequence[int], n_samples: int, thinning: int, burn_in: int,
                  method: str = "auto", workers: int = 1) -> List[EnsembleRun]:
    """One independent chain per seed; results are returned in seed-list order."""
    tasks = [(p, n_samples, thinning, burn_in, int(s), method) for s in seeds]
    if workers <= 1 or len(tasks) <= 1:
        return [_chain_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_chain_worker, tasks))


# ---------- estimators ----------
@dataclass
class EnsembleStats:
    rho1: Estimate
    bin_edges: np.ndarray
    rho2: np.ndarray
    rho2_stderr: np.ndarray
    u2: np.ndarray
    u2_stderr: np.ndarray
    chi: Estimate
    chi_fluct: Estimate
    chi_tail: float
    mean_n: Estimate
    n_samples: int
    autocorrelation_time: float
    block_length: int

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def shell_volumes(edges: np.ndarray, d: int) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    return sphere_area(d) * (edges[1:] ** d - edges[:-1] ** d) / d


def estimate_correlations(ensemble: Sequence[Configuration], p: GibbsParams, bins,
                          n_boot: int = 200, block_length: Optional[int] = None,
                          rng: RngLike = 0) -> EnsembleStats:
    """
    ρ⁽¹⁾ = ⟨n⟩/|Λ|, ρ⁽²⁾ from the pair-distance histogram normalized by shell volume and
    |Λ|, u⁽²⁾ = ρ⁽²⁾ − (ρ⁽¹⁾)², χ = ρ⁽¹⁾ + Σ u⁽²⁾·shellvol and χ_fluct = Var(n)/|Λ|.
    """
    if not ensemble:
        raise ValueError("estimate_correlations needs a non-empty ensemble")
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise ValueError("bins must be increasing non-negative bin edges")
    half = p.torus.L / 2.0
    if edges[-1] > half * (1.0 + 1e-12):
        raise ValueError(f"bins extend to {edges[-1]:g}, beyond L/2 = {half:g}")
    vol = p.volume
    shells = shell_volumes(edges, p.torus.d)
    k = len(edges) - 1

    rows = np.zeros((len(ensemble), 2 + k))
    for s, c in enumerate(ensemble):
        rows[s, 0] = c.n
        rows[s, 1] = c.n ** 2
        if c.n >= 2:
            pl = pair_displacements(c, edges[-1])
            rows[s, 2:] = np.histogram(pl.r, bins=edges)[0]

    def statistic(data: np.ndarray) -> np.ndarray:
        mean = data.mean(axis=0)
        rho1 = mean[0] / vol
        rho2 = 2.0 * mean[2:] / (vol * shells)
        u2 = rho2 - rho1 ** 2
        chi = rho1 + float(np.sum(u2 * shells))
        chi_fluct = (mean[1] - mean[0] ** 2) / vol
        return np.concatenate([[rho1, chi, chi_fluct, mean[0]], rho2, u2])

    tau = integrated_autocorr_time(rows[:, 0])
    blk = block_length if block_length is not None else max(1, int(math.ceil(5.0 * tau)))
    point, err = block_bootstrap(rows, statistic, blk, n_boot, np.random.default_rng(rng))
    # the plug-in variance is biased by 1/n; use the unbiased sample variance for the point value
    if len(ensemble) > 1:
        point[2] = float(np.var(rows[:, 0], ddof=1)) / vol
    rho2 = point[4:4 + k]
    u2 = point[4 + k:]
    stats = EnsembleStats(
        rho1=Estimate(float(point[0]), float(err[0])),
        bin_edges=edges,
        rho2=rho2,
        rho2_stderr=err[4:4 + k],
        u2=u2,
        u2_stderr=err[4 + k:],
        chi=Estimate(float(point[1]), float(err[1])),
        chi_fluct=Estimate(float(point[2]), float(err[2])),
        chi_tail=float(abs(u2[-1]) * vol),
        mean_n=Estimate(float(point[3]), float(err[3])),
        n_samples=len(ensemble),
        autocorrelation_time=float(tau),
        block_length=int(blk),
    )
    if stats.chi_tail > 3.0 * max(stats.chi.stderr, 1e-12) * vol and not p.is_poisson:
        logger.info("chi truncated at r=%.4g with tail proxy |u2|*V=%.4g", edges[-1], stats.chi_tail)
    return stats


@dataclass(frozen=True)
class RuelleReport:
    xi: float
    rho1_ok: bool
    rho2_ok: np.ndarray
    max_ratio: float

    @property
    def passed(self) -> bool:
        return bool(self.rho1_ok and np.all(self.rho2_ok))


def ruelle_check(stats: EnsembleStats, xi: float) -> RuelleReport:
    """Ruelle bound ρ⁽¹⁾ <= ξ and ρ⁽²⁾ <= ξ² bin-wise; informational."""
    if xi <= 0:
        raise ValueError(f"xi must be > 0, got {xi}")
    rho2_ok = stats.rho2 <= xi ** 2
    ratios = [stats.rho1.value / xi]
    if len(stats.rho2):
        ratios.append(float(np.max(stats.rho2)) / xi ** 2)
    report = RuelleReport(xi, bool(stats.rho1.value <= xi), rho2_ok, float(max(ratios)))
    if not report.passed:
        logger.warning("Ruelle bound xi=%g exceeded (max ratio %.4g)", xi, report.max_ratio)
    return report


def total_energies(ensemble: Sequence[Configuration], phi: PairPotential) -> np.ndarray:
    return np.array([total_energy(c, phi) for c in ensemble])
