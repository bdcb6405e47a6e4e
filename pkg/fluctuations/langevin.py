"""
fluctuations/langevin.py

Overdamped Langevin dynamics dx = B(γ, x)dt + √2 dW on the torus and the scaled
generator acting on linear functionals ⟨f, ·⟩.

- Euler–Maruyama with one Gaussian increment per particle, drawn in particle-index order.
- A step that would put a pair below the potential's hard floor is refined by a
  Brownian bridge: the drawn increment W over dt is split into W/2 ± √(dt/4)·η, so the
  halved steps follow the same Brownian path. At most MAX_HALVINGS nested refinements.
- run_scaled records fluctuation-field pairings at scaled times t_j = j·stride·dt·ε².
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from fluctuations.configuration import Configuration, close_pairs, drift, pair_displacements
from fluctuations.errors import ClosePairError, StiffStepError
from fluctuations.gibbs import GibbsParams
from fluctuations.oulimit import OUParams
from fluctuations.potentials import PairPotential
from fluctuations.scaling import FieldSeries, ScaledField, TestFunction, fluctuation_field, pairing

logger = logging.getLogger(__name__)

MAX_HALVINGS = 8
Observer = Callable[[ScaledField], float]


@dataclass(frozen=True)
class DynamicsParams:
    dt: float
    horizon: float
    eps: float = 1.0
    record_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {self.horizon}")
        if not 0.0 < self.eps <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")

    @property
    def micro_horizon(self) -> float:
        return self.horizon / self.eps ** 2

    @property
    def n_steps(self) -> int:
        return int(round(self.micro_horizon / self.dt))

    @property
    def record_interval(self) -> float:
        """Scaled time between two records."""
        return self.record_stride * self.dt * self.eps ** 2


@dataclass
class Trajectory:
    times: List[float]
    configurations: List[Configuration]
    params: Optional[DynamicsParams] = None
    seed: Optional[int] = None
    halvings: int = 0

    def __post_init__(self):
        if len(self.times) != len(self.configurations):
            raise ValueError("times and configurations differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("trajectory times must be strictly increasing")
        counts = {c.n for c in self.configurations}
        if len(counts) > 1:
            raise ValueError(f"particle count changed along the trajectory: {sorted(counts)}")

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class _StepLog:
    halvings: int = 0
    deepest: int = 0


def _close_after(c: Configuration, positions: np.ndarray, phi: PairPotential):
    if phi.hard_floor <= 0.0 or len(positions) < 2:
        return [], math.inf
    trial = Configuration(c.torus, positions)
    return close_pairs(pair_displacements(trial, phi.hard_floor), phi.hard_floor)


def _advance(c: Configuration, positions: np.ndarray, phi: PairPotential, beta: float,
             w: np.ndarray, dt: float, level: int, rng: np.random.Generator,
             time: float, log: _StepLog) -> np.ndarray:
    current = Configuration(c.torus, positions)
    b = drift(current, phi, beta).vectors
    proposal = c.torus.wrap(positions + b * dt + math.sqrt(2.0) * w)
    bad, dist = _close_after(c, proposal, phi)
    if not bad:
        return proposal
    if level >= MAX_HALVINGS:
        raise StiffStepError(time, level, dist, bad)
    log.halvings += 1
    log.deepest = max(log.deepest, level + 1)
    eta = rng.standard_normal(w.shape)
    w1 = 0.5 * w + math.sqrt(dt / 4.0) * eta
    w2 = w - w1
    mid = _advance(c, positions, phi, beta, w1, dt / 2.0, level + 1, rng, time, log)
    return _advance(c, mid, phi, beta, w2, dt / 2.0, level + 1, rng, time + dt / 2.0, log)


def step(c: Configuration, phi: PairPotential, beta: float, dt: float, rng: np.random.Generator,
         time: float = 0.0, log: Optional[_StepLog] = None) -> Configuration:
    """One Euler–Maruyama step; returns a new configuration (the input is untouched)."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if c.n == 0:
        return c.copy()
    w = math.sqrt(dt) * rng.standard_normal((c.n, c.torus.d))
    if beta == 0.0 or phi.is_zero:
        return Configuration(c.torus, c.torus.wrap(c.positions + math.sqrt(2.0) * w), c.cells.cutoff)
    bad, dist = _close_after(c, c.positions, phi)
    if bad:
        raise ClosePairError(bad, dist, phi.hard_floor)
    log = log if log is not None else _StepLog()
    new = _advance(c, c.positions.copy(), phi, beta, w, dt, 0, rng, time, log)
    return Configuration(c.torus, new, c.cells.cutoff)


def integrate(initial: Configuration, phi: PairPotential, beta: float, p: DynamicsParams,
              rng: Optional[np.random.Generator] = None) -> Trajectory:
    """Full snapshot recording in microscopic time; meant for small systems."""
    rng = np.random.default_rng(p.seed) if rng is None else rng
    log = _StepLog()
    cur = initial.copy()
    times, snaps = [0.0], [cur.copy()]
    for k in range(p.n_steps):
        cur = step(cur, phi, beta, p.dt, rng, time=k * p.dt, log=log)
        if (k + 1) % p.record_stride == 0:
            times.append((k + 1) * p.dt)
            snaps.append(cur.copy())
    if log.halvings:
        logger.warning("integrate: %d step halvings (deepest level %d)", log.halvings, log.deepest)
    return Trajectory(times, snaps, p, p.seed, log.halvings)


def run_scaled(initial: Configuration, p: DynamicsParams, gp: GibbsParams, fs: Sequence[TestFunction],
               rho1: Optional[float] = None, observers: Optional[Mapping[str, Observer]] = None) -> FieldSeries:
    """
    Integrate to microscopic time ε⁻²T and record ⟨f_i, X_ε(t_j)⟩ plus named observers.

    `initial` lives on the microscopic torus of side L₀/ε (gp.torus); rho1 defaults to z
    for Poisson targets and must be supplied otherwise.
    """
    if initial.torus != gp.torus:
        raise ValueError(f"initial configuration torus {initial.torus} differs from {gp.torus}")
    if rho1 is None:
        if not gp.is_poisson:
            raise ValueError("rho1 must be supplied for interacting targets")
        rho1 = gp.z
    observers = dict(observers or {})
    ids = [f.id for f in fs]
    columns = ids + [name for name in observers if name not in ids]
    rng = np.random.default_rng(p.seed)
    log = _StepLog()

    def record(c: Configuration) -> List[float]:
        sf = ScaledField(c, p.eps, rho1)
        row = [fluctuation_field(sf, f) for f in fs]
        row.extend(float(fn(sf)) for name, fn in observers.items() if name not in ids)
        return row

    cur = initial.copy()
    times, rows = [0.0], [record(cur)]
    for k in range(p.n_steps):
        try:
            cur = step(cur, gp.potential, gp.beta, p.dt, rng, time=k * p.dt, log=log)
        except StiffStepError as exc:
            logger.error("run_scaled failed at microscopic t=%.6g (eps=%g, seed=%d)", exc.time, p.eps, p.seed)
            raise
        if (k + 1) % p.record_stride == 0:
            times.append((k + 1) * p.dt * p.eps ** 2)
            rows.append(record(cur))
    if log.halvings:
        logger.warning("run_scaled eps=%g seed=%d: %d step halvings (deepest level %d)",
                       p.eps, p.seed, log.halvings, log.deepest)
    meta: Dict[str, object] = {
        "source": "langevin", "eps": p.eps, "beta": gp.beta, "z": gp.z, "L": gp.torus.L,
        "dt": p.dt, "seed": p.seed, "ids": "|".join(ids),
    }
    return FieldSeries(np.array(times), np.array(rows, dtype=float).reshape(len(rows), len(columns)), columns, meta)


# ---------- generators on linear functionals ----------
def _laplacian_pairing(sf: ScaledField, f: TestFunction) -> float:
    f.check_support(sf.torus)
    values = f.laplacian(sf.positions) if sf.configuration.n else np.zeros(0)
    return pairing(sf, values, 0.0)


def _pair_term(gamma: Configuration, eps: float, gp: GibbsParams, f: TestFunction, sf: ScaledField) -> float:
    """ε^{d/2}·β·Σ_{pairs}(∇φ_ε(x − y), ∇f(x) − ∇f(y)) over scaled positions, ∇φ_ε(εu) = ε⁻¹∇φ(u)."""
    phi = gp.potential
    if gp.beta == 0.0 or phi.is_zero or gamma.n < 2:
        return 0.0
    pl = pair_displacements(gamma, phi.interaction_range)
    if not len(pl):
        return 0.0
    if phi.hard_floor > 0.0:
        bad, dist = close_pairs(pl, phi.hard_floor)
        if bad:
            raise ClosePairError(bad, dist, phi.hard_floor)
    grad_phi = phi.gradient_of_displacement(pl.disp) / eps
    grad_f = f.gradient(sf.positions)
    dots = np.einsum("pk,pk->p", grad_phi, grad_f[pl.i] - grad_f[pl.j])
    return sf.mass * gp.beta * math.fsum(dots)


def scaled_generator_linear(gamma: Configuration, eps: float, gp: GibbsParams, f: TestFunction,
                            rho1: float) -> float:
    """H_ε⟨f, ·⟩ at ω = S_out,ε(S_in,ε(γ)): ⟨Δf, ω⟩ − ε^{d/2}·β·Σ_pairs(∇φ_ε, ∇f(x) − ∇f(y))."""
    sf = ScaledField(gamma, eps, rho1)
    return _laplacian_pairing(sf, f) - _pair_term(gamma, eps, gp, f, sf)


def limit_generator_linear(gamma: Configuration, eps: float, f: TestFunction, ou: OUParams) -> float:
    """H⟨f, ·⟩ = (ρ⁽¹⁾/χ)⟨Δf, ω⟩."""
    sf = ScaledField(gamma, eps, ou.rho1)
    return ou.diffusion * _laplacian_pairing(sf, f)


def generator_gap_linear(gamma: Configuration, eps: float, gp: GibbsParams, f: TestFunction,
                         ou: OUParams) -> float:
    """(1 − ρ⁽¹⁾/χ)·⟨Δf, ω⟩ − ε^{d/2}·β·Σ_pairs(∇φ_ε(x − y), ∇f(x) − ∇f(y))."""
    sf = ScaledField(gamma, eps, ou.rho1)
    lap = _laplacian_pairing(sf, f)
    return (1.0 - ou.diffusion) * lap - _pair_term(gamma, eps, gp, f, sf)
