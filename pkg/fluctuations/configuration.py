"""
fluctuations/configuration.py

Finite particle configurations on a periodic torus.
- Torus geometry with the minimum-image convention.
- CellList: incremental spatial hash used for single-particle queries (sampler moves,
  interaction energies).
- Bulk pair enumeration through scipy's periodic KD-tree, canonicalized to sorted
  (i < j) order so every energy/drift reduction is order-deterministic.
- total_energy / interaction_energy / drift, with compensated summation for energies.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from fluctuations.errors import ClosePairError
from fluctuations.potentials import PairPotential

logger = logging.getLogger(__name__)

MAX_CELLS_PER_DIM = 256


@dataclass(frozen=True)
class Torus:
    L: float
    d: int

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError(f"torus side must be > 0, got {self.L}")
        if int(self.d) < 1:
            raise ValueError(f"torus dimension must be >= 1, got {self.d}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "d", int(self.d))

    @property
    def volume(self) -> float:
        return self.L ** self.d

    def wrap(self, x) -> np.ndarray:
        y = np.mod(np.asarray(x, dtype=float), self.L)
        # np.mod can round up to exactly L for tiny negative inputs
        return np.where(y >= self.L, 0.0, y)

    def displacement(self, x, y) -> np.ndarray:
        dx = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return dx - self.L * np.floor(dx / self.L + 0.5)

    def random_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.wrap(rng.random((n, self.d)) * self.L)

    def validate_for(self, phi: PairPotential) -> None:
        if phi.dimension != self.d:
            raise ValueError(f"potential dimension {phi.dimension} != torus dimension {self.d}")
        if phi.interaction_range > 0 and self.L <= 2.0 * phi.interaction_range:
            raise ValueError(
                f"torus side {self.L:g} must exceed twice the interaction range "
                f"{phi.interaction_range:g} for the minimum image to be valid"
            )

    def scaled(self, factor: float) -> "Torus":
        return Torus(self.L * factor, self.d)


def displacement(t: Torus, x, y) -> np.ndarray:
    """Minimum-image representative of x − y with coordinates in [−L/2, L/2)."""
    return t.displacement(x, y)


class CellList:
    """
    Spatial hash with cell side >= cutoff; neighbors of a point live in the 3^d
    surrounding cells. An inactive list (cutoff <= 0) answers every query with
    no candidates, which is exact for non-interacting systems.
    """

    def __init__(self, torus: Torus, cutoff: float):
        self.torus = torus
        self.cutoff = float(cutoff)
        self.active = self.cutoff > 0.0
        m = int(torus.L // self.cutoff) if self.active else 1
        self.cells_per_dim = max(1, min(m, MAX_CELLS_PER_DIM))
        self.cell_size = torus.L / self.cells_per_dim
        self._cells: Dict[Tuple[int, ...], List[int]] = {}
        self._neighbor_cache: Dict[Tuple[int, ...], Tuple[Tuple[int, ...], ...]] = {}
        self._offsets = list(itertools.product((-1, 0, 1), repeat=torus.d))

    def cell_of(self, x) -> Tuple[int, ...]:
        idx = np.floor(np.asarray(x, dtype=float) / self.cell_size).astype(int) % self.cells_per_dim
        return tuple(int(i) for i in idx)

    def neighbor_cells(self, cell: Tuple[int, ...]) -> Tuple[Tuple[int, ...], ...]:
        cached = self._neighbor_cache.get(cell)
        if cached is None:
            m = self.cells_per_dim
            seen = {tuple((c + o) % m for c, o in zip(cell, off)) for off in self._offsets}
            cached = tuple(sorted(seen))
            self._neighbor_cache[cell] = cached
        return cached

    def clear(self) -> None:
        self._cells.clear()

    def insert(self, index: int, x) -> None:
        if self.active:
            self._cells.setdefault(self.cell_of(x), []).append(index)

    def remove(self, index: int, x) -> None:
        if not self.active:
            return
        cell = self.cell_of(x)
        members = self._cells[cell]
        members.remove(index)
        if not members:
            del self._cells[cell]

    def relabel(self, old: int, new: int, x) -> None:
        if not self.active:
            return
        members = self._cells[self.cell_of(x)]
        members[members.index(old)] = new

    def candidates(self, x) -> np.ndarray:
        if not self.active:
            return np.empty(0, dtype=int)
        found: List[int] = []
        for cell in self.neighbor_cells(self.cell_of(x)):
            found.extend(self._cells.get(cell, ()))
        return np.array(sorted(found), dtype=int)

    def count(self) -> int:
        return sum(len(v) for v in self._cells.values())


class Configuration:
    """
    Particles in [0, L)^d with a cell index sized by the interaction cutoff.

    Mutation (add/remove/move) keeps the cell index consistent; `remove` is a
    swap-remove, so the last particle takes the freed slot.
    """

    def __init__(self, torus: Torus, positions=None, cutoff: float = 0.0):
        self.torus = torus
        pts = np.zeros((0, torus.d)) if positions is None else np.asarray(positions, dtype=float)
        pts = pts.reshape(-1, torus.d)
        if pts.size and (np.any(pts < 0.0) or np.any(pts >= torus.L)):
            pts = torus.wrap(pts)
        self._pos = np.array(pts, dtype=float)
        self._n = len(pts)
        self.cells = CellList(torus, cutoff)
        for i, x in enumerate(self._pos[: self._n]):
            self.cells.insert(i, x)

    @classmethod
    def empty(cls, torus: Torus, cutoff: float = 0.0) -> "Configuration":
        return cls(torus, None, cutoff)

    @property
    def positions(self) -> np.ndarray:
        return self._pos[: self._n]

    @property
    def n(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    def copy(self) -> "Configuration":
        return Configuration(self.torus, self.positions.copy(), self.cells.cutoff)

    def with_cutoff(self, cutoff: float) -> "Configuration":
        return Configuration(self.torus, self.positions.copy(), cutoff)

    def _grow(self) -> None:
        cap = max(16, 2 * len(self._pos))
        grown = np.zeros((cap, self.torus.d))
        grown[: self._n] = self._pos[: self._n]
        self._pos = grown

    def add(self, x) -> int:
        if self._n >= len(self._pos):
            self._grow()
        i = self._n
        self._pos[i] = self.torus.wrap(x)
        self._n += 1
        self.cells.insert(i, self._pos[i])
        return i

    def remove(self, i: int) -> None:
        last = self._n - 1
        self.cells.remove(i, self._pos[i])
        if i != last:
            self.cells.relabel(last, i, self._pos[last])
            self._pos[i] = self._pos[last]
        self._n = last

    def move(self, i: int, x) -> None:
        new = self.torus.wrap(x)
        if self.cells.cell_of(new) != self.cells.cell_of(self._pos[i]):
            self.cells.remove(i, self._pos[i])
            self.cells.insert(i, new)
        self._pos[i] = new

    def set_positions(self, positions: np.ndarray) -> None:
        """Replace all positions (same particle count); rebuilds the cell index."""
        pts = self.torus.wrap(positions).reshape(-1, self.torus.d)
        self._pos = np.array(pts, dtype=float)
        self._n = len(pts)
        self.cells.clear()
        for i, x in enumerate(self._pos):
            self.cells.insert(i, x)

    def neighbors_of(self, x, exclude: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Candidate indices near x and their minimum-image displacements x − x_j."""
        idx = self.cells.candidates(x)
        if exclude is not None and idx.size:
            idx = idx[idx != exclude]
        if idx.size == 0:
            return idx, np.zeros((0, self.torus.d))
        return idx, self.torus.displacement(np.asarray(x, dtype=float)[None, :], self._pos[idx])


@dataclass
class PairList:
    i: np.ndarray
    j: np.ndarray
    disp: np.ndarray  # x_i − x_j, minimum image

    @property
    def r(self) -> np.ndarray:
        return np.linalg.norm(self.disp, axis=1)

    def __len__(self) -> int:
        return len(self.i)


def pair_displacements(c: Configuration, cutoff: float) -> PairList:
    """All unordered pairs closer than `cutoff`, sorted lexicographically by (i, j)."""
    d = c.torus.d
    if c.n < 2 or cutoff <= 0.0:
        return PairList(np.empty(0, int), np.empty(0, int), np.zeros((0, d)))
    if cutoff >= c.torus.L / 2.0:
        ii, jj = np.triu_indices(c.n, k=1)
    else:
        tree = cKDTree(c.positions, boxsize=c.torus.L)
        pairs = tree.query_pairs(cutoff, output_type="ndarray")
        if len(pairs) == 0:
            return PairList(np.empty(0, int), np.empty(0, int), np.zeros((0, d)))
        pairs = np.sort(pairs, axis=1)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        ii, jj = pairs[order, 0], pairs[order, 1]
    disp = c.torus.displacement(c.positions[ii], c.positions[jj])
    keep = np.linalg.norm(disp, axis=1) < cutoff
    return PairList(ii[keep], jj[keep], disp[keep])


def min_pair_distance(c: Configuration, cutoff: float) -> float:
    pl = pair_displacements(c, cutoff)
    return float(pl.r.min()) if len(pl) else math.inf


def close_pairs(pl: PairList, floor: float) -> Tuple[List[Tuple[int, int]], float]:
    r = pl.r
    bad = np.flatnonzero(r < floor)
    return [(int(pl.i[k]), int(pl.j[k])) for k in bad], float(r[bad].min()) if bad.size else math.inf


def total_energy(c: Configuration, phi: PairPotential) -> float:
    """Σ over unordered pairs of φ; +inf when a pair sits on a singular point."""
    if phi.is_zero or c.n < 2:
        return 0.0
    pl = pair_displacements(c, phi.interaction_range)
    if not len(pl):
        return 0.0
    e = phi.energy_of_distance(pl.r)
    if np.any(np.isinf(e)):
        return math.inf
    return math.fsum(e)


def particle_energy(c: Configuration, phi: PairPotential, x, exclude: Optional[int] = None) -> float:
    """Σ_j φ(x − x_j) over the configuration, optionally skipping index `exclude`."""
    if phi.is_zero or c.n == 0:
        return 0.0
    _, disp = c.neighbors_of(x, exclude=exclude)
    if not len(disp):
        return 0.0
    r = np.linalg.norm(disp, axis=1)
    e = phi.energy_of_distance(r[r < phi.interaction_range])
    if np.any(np.isinf(e)):
        return math.inf
    return math.fsum(e)


def interaction_energy(eta: Configuration, gamma: Configuration, phi: PairPotential) -> float:
    """W(η|γ) = Σ_{x∈η, y∈γ} φ(x − y)."""
    if eta.torus != gamma.torus:
        raise ValueError("interaction_energy needs both configurations on the same torus")
    if phi.is_zero or eta.n == 0 or gamma.n == 0:
        return 0.0
    host = gamma if gamma.cells.cutoff >= phi.interaction_range else gamma.with_cutoff(phi.interaction_range)
    parts = [particle_energy(host, phi, x) for x in eta.positions]
    if any(math.isinf(p) for p in parts):
        return math.inf
    return math.fsum(parts)


@dataclass
class DriftField:
    vectors: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.vectors.sum(axis=0)


def drift(c: Configuration, phi: PairPotential, beta: float) -> DriftField:
    """B(γ, x) = −β Σ_{y≠x} ∇φ(x − y); raises ClosePairError below the hard floor."""
    out = np.zeros((c.n, c.torus.d))
    if beta == 0.0 or phi.is_zero or c.n < 2:
        return DriftField(out)
    pl = pair_displacements(c, phi.interaction_range)
    if not len(pl):
        return DriftField(out)
    if phi.hard_floor > 0.0:
        bad, dist = close_pairs(pl, phi.hard_floor)
        if bad:
            raise ClosePairError(bad, dist, phi.hard_floor)
    force = -beta * phi.gradient_of_displacement(pl.disp)
    np.add.at(out, pl.i, force)
    np.add.at(out, pl.j, -force)
    return DriftField(out)


def check_stability(c: Configuration, phi: PairPotential, energy: Optional[float] = None) -> bool:
    """Stability surrogate E >= −B·n; a violation points at wrong potential metadata."""
    e = total_energy(c, phi) if energy is None else energy
    ok = e >= -phi.stability_constant * c.n - 1e-12 * max(1.0, abs(e))
    if not ok:
        logger.warning(
            "stability surrogate violated for %s: E=%.6g < -B*n=%.6g (n=%d); check stability_constant",
            phi.label, e, -phi.stability_constant * c.n, c.n,
        )
    return ok
