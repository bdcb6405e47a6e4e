"""
fluctuations/oracle.py

Brute-force ground truth for small finite volumes (d = 1 or 2).

- Truncated Lebesgue–Poisson sums Z = Σ_{n<=N} zⁿ/n! ∫_{Λⁿ} e^{−βE} with tensor
  Gauss–Legendre quadrature on the box.
- Correlation functions as physical densities: ρ(η) = z^{|η|} Z⁻¹ Σ_m z^m/m! ∫ e^{−βE(η∪ξ)} dξ,
  so ρ(η) = z^{|η|} for a non-interacting system.
- Two truncations: "total" restricts the measure to at most N particles (an exact
  finite-volume Gibbs measure; the β-derivative identity holds for it exactly),
  "extra" adds up to N points to every η (Poisson correlations exact at β = 0).
- K-transform by subset enumeration and the β-derivative identity
  ∂_β ρ(η) = −E(η)ρ(η) − ∫W(η|x)ρ(η∪x) − ½∫∫φ(x−y)[ρ(η∪{x,y}) − ρ(η)ρ(x,y)].
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import special

from fluctuations.configuration import Configuration, Torus
from fluctuations.errors import OracleTractabilityError
from fluctuations.potentials import PairPotential

logger = logging.getLogger(__name__)

MAX_QUAD_DIM = 8
SUBSET_LIMIT = 12
CHUNK_CELLS = 1 << 21


@dataclass(frozen=True)
class FiniteVolumeSpec:
    length: float
    d: int = 1
    boundary: str = "periodic"
    n_max: int = 4
    quad_points: int = 24
    truncation: str = "total"
    remainder_tolerance: float = 1e-6

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"oracle supports d in (1, 2), got {self.d}")
        if self.length <= 0:
            raise ValueError(f"box length must be > 0, got {self.length}")
        if self.boundary not in ("free", "periodic"):
            raise ValueError(f"boundary must be 'free' or 'periodic', got {self.boundary!r}")
        if self.truncation not in ("total", "extra"):
            raise ValueError(f"truncation must be 'total' or 'extra', got {self.truncation!r}")
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")
        if self.d * self.n_max > MAX_QUAD_DIM:
            raise OracleTractabilityError(
                f"quadrature dimension d*n_max = {self.d * self.n_max} exceeds {MAX_QUAD_DIM}"
            )
        if self.quad_points < 2:
            raise ValueError(f"quad_points must be >= 2, got {self.quad_points}")

    @property
    def volume(self) -> float:
        return self.length ** self.d

    def refined(self, factor: int = 2) -> "FiniteVolumeSpec":
        return FiniteVolumeSpec(self.length, self.d, self.boundary, self.n_max,
                                self.quad_points * factor, self.truncation, self.remainder_tolerance)


@dataclass(frozen=True)
class OracleValue:
    value: float
    remainder: float
    flagged: bool


@dataclass
class FiniteConfigurationFunction:
    """G(η) on finite point sets with a declared support bound (cardinality and/or region)."""

    evaluator: Callable[[np.ndarray], float]
    max_cardinality: Optional[int] = None
    region: Optional[Callable[[np.ndarray], bool]] = None

    def __call__(self, points: np.ndarray) -> float:
        return float(self.evaluator(points))

    @property
    def support_bounded(self) -> bool:
        return self.max_cardinality is not None

    @classmethod
    def empty_indicator(cls) -> "FiniteConfigurationFunction":
        return cls(lambda pts: 1.0 if len(pts) == 0 else 0.0, max_cardinality=0)

    @classmethod
    def singleton_indicator(cls, region: Callable[[np.ndarray], bool]) -> "FiniteConfigurationFunction":
        return cls(lambda pts: 1.0 if len(pts) == 1 else 0.0, max_cardinality=1, region=region)

    @classmethod
    def singleton_weight(cls, g: Callable[[np.ndarray], float]) -> "FiniteConfigurationFunction":
        return cls(lambda pts: float(g(pts[0])) if len(pts) == 1 else 0.0, max_cardinality=1)

    @classmethod
    def combine(cls, coefficients: Sequence[float],
                functions: Sequence["FiniteConfigurationFunction"]) -> "FiniteConfigurationFunction":
        """Σ a_i G_i; support bound is the loosest of the parts."""
        coefficients = list(coefficients)
        functions = list(functions)
        cards = [f.max_cardinality for f in functions]
        bound = None if any(c is None for c in cards) else max(cards)
        return cls(lambda pts: sum(a * f(pts) for a, f in zip(coefficients, functions)), bound)


class OracleSystem:
    """Quadrature nodes, weights and Z for one (spec, φ, β, z); evaluations are batched."""

    def __init__(self, spec: FiniteVolumeSpec, phi: PairPotential, beta: float, z: float):
        if phi.dimension != spec.d:
            raise ValueError(f"potential dimension {phi.dimension} != oracle dimension {spec.d}")
        if z <= 0:
            raise ValueError(f"z must be > 0, got {z}")
        self.spec = spec
        self.phi = phi
        self.beta = float(beta)
        self.z = float(z)
        self.torus = Torus(spec.length, spec.d)
        if spec.boundary == "periodic":
            self.torus.validate_for(phi)
        t, w = special.roots_legendre(spec.quad_points)
        x1 = 0.5 * spec.length * (t + 1.0)
        w1 = 0.5 * spec.length * w
        if spec.d == 1:
            self.nodes = x1[:, None]
            self.weights = w1
        else:
            gx, gy = np.meshgrid(x1, x1, indexing="ij")
            self.nodes = np.stack([gx.ravel(), gy.ravel()], axis=1)
            self.weights = np.outer(w1, w1).ravel()
        empty = np.zeros((1, 0, spec.d))
        self.integrals = self.augmented_integrals(empty, spec.n_max)[0]
        terms = [self.z ** n / math.factorial(n) * self.integrals[n] for n in range(spec.n_max + 1)]
        self.Z = math.fsum(terms)
        n1 = spec.n_max + 1
        self.remainder = (
            (self.z * spec.volume) ** n1 * math.exp(self.beta * phi.stability_constant * n1) / math.factorial(n1)
        )
        self.flagged = self.remainder / self.Z > spec.remainder_tolerance
        if self.flagged:
            logger.warning(
                "oracle truncation remainder %.3e exceeds tolerance relative to Z=%.6g (n_max=%d)",
                self.remainder, self.Z, spec.n_max,
            )

    # ---------- energies ----------
    def _disp(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.spec.boundary == "periodic":
            return self.torus.displacement(a, b)
        return a - b

    def _pair_energy(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """φ(a − b) over broadcast point arrays of shape (..., d)."""
        return self.phi.energy_of_distance(np.linalg.norm(self._disp(a, b), axis=-1))

    def _internal_energy(self, pts: np.ndarray) -> np.ndarray:
        """E of each point set in a batch of shape (B, m, d)."""
        out = np.zeros(pts.shape[0])
        m = pts.shape[1]
        for a, b in itertools.combinations(range(m), 2):
            out = out + self._pair_energy(pts[:, a], pts[:, b])
        return out

    def _boltzmann(self, energy: np.ndarray) -> np.ndarray:
        if self.beta == 0.0 or self.phi.is_zero:
            return np.ones_like(energy)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.exp(-self.beta * energy)
        return np.where(np.isinf(energy) & (energy > 0) & (self.beta > 0), 0.0, out)

    def _grid(self, m: int, start: int, stop: int):
        idx = np.unravel_index(np.arange(start, stop), (len(self.weights),) * m)
        pts = np.stack([self.nodes[i] for i in idx], axis=1)
        w = np.prod(np.stack([self.weights[i] for i in idx], axis=1), axis=1)
        return pts, w

    def augmented_integrals(self, eta: np.ndarray, m_max: int) -> np.ndarray:
        """
        J_m(η) = ∫_{Λ^m} e^{−βE(η∪ξ)} dξ for m = 0..m_max and every η in the batch
        (shape (B, k, d)); returns an array of shape (B, m_max + 1).
        """
        eta = np.asarray(eta, dtype=float)
        b, k, _ = eta.shape
        if self.spec.d * m_max > MAX_QUAD_DIM:
            raise OracleTractabilityError(f"{m_max} integrated points exceed the quadrature guard")
        out = np.zeros((b, m_max + 1))
        e_eta = self._internal_energy(eta) if k >= 2 else np.zeros(b)
        out[:, 0] = self._boltzmann(e_eta)
        g = len(self.weights)
        for m in range(1, m_max + 1):
            total = g ** m
            chunk = max(1, CHUNK_CELLS // max(1, b * (k + m)))
            acc = np.zeros(b)
            for start in range(0, total, chunk):
                stop = min(total, start + chunk)
                xi, w = self._grid(m, start, stop)
                e = e_eta[:, None] + self._internal_energy(xi)[None, :]
                for a in range(k):
                    for c in range(m):
                        e = e + self._pair_energy(eta[:, a][:, None, :], xi[:, c][None, :, :])
                acc += self._boltzmann(e) @ w
            out[:, m] = acc
        return out

    # ---------- public evaluations ----------
    def _extra_points(self, k: int) -> int:
        if self.spec.truncation == "total":
            return self.spec.n_max - k
        return self.spec.n_max

    def correlation_batch(self, eta: np.ndarray) -> np.ndarray:
        """ρ(η) for a batch of equal-size point sets, shape (B, k, d) -> (B,)."""
        eta = np.asarray(eta, dtype=float)
        b, k, _ = eta.shape
        m_max = self._extra_points(k)
        if m_max < 0:
            return np.zeros(b)
        j = self.augmented_integrals(eta, m_max)
        coef = np.array([self.z ** m / math.factorial(m) for m in range(m_max + 1)])
        return self.z ** k * (j @ coef) / self.Z

    def correlation(self, eta) -> float:
        pts = _as_points(eta, self.spec.d)
        self._check_inside(pts)
        if len(pts) == 0:
            return 1.0
        return float(self.correlation_batch(pts[None, :, :])[0])

    def _check_inside(self, pts: np.ndarray) -> None:
        if pts.size and (np.any(pts < 0.0) or np.any(pts > self.spec.length)):
            raise ValueError(f"points must lie in [0, {self.spec.length:g}]^{self.spec.d}")

    def mean_particle_number(self) -> float:
        n = np.arange(self.spec.n_max + 1)
        terms = [self.z ** k / math.factorial(k) * self.integrals[k] * k for k in n]
        return math.fsum(terms) / self.Z

    def expectation(self, F: Callable[[np.ndarray], float]) -> float:
        """E[F(γ)] under the (truncated) finite-volume Gibbs measure, node by node."""
        total = 0.0
        for n in range(self.spec.n_max + 1):
            coef = self.z ** n / math.factorial(n)
            if n == 0:
                total += coef * float(F(np.zeros((0, self.spec.d))))
                continue
            pts, w = self._grid(n, 0, len(self.weights) ** n)
            boltz = self._boltzmann(self._internal_energy(pts))
            vals = np.array([F(p) for p in pts])
            total += coef * float(np.sum(w * boltz * vals))
        return total / self.Z

    def energy(self, eta) -> float:
        pts = _as_points(eta, self.spec.d)
        if len(pts) < 2:
            return 0.0
        return float(self._internal_energy(pts[None, :, :])[0])

    def pair_profile(self, r: np.ndarray) -> np.ndarray:
        """ρ⁽²⁾ at separations r along axis 1 (pair centred in the box)."""
        r = np.asarray(r, dtype=float)
        c = np.full(self.spec.d, self.spec.length / 2.0)
        e1 = np.zeros(self.spec.d)
        e1[0] = 1.0
        a = c[None, :] - 0.5 * r[:, None] * e1
        b = c[None, :] + 0.5 * r[:, None] * e1
        return self.correlation_batch(np.stack([a, b], axis=1))

    def density_profile(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.spec.d)
        return self.correlation_batch(x[:, None, :])


def _as_points(eta, d: int) -> np.ndarray:
    if isinstance(eta, Configuration):
        return eta.positions.copy()
    arr = np.asarray(eta, dtype=float)
    if arr.size == 0:
        return np.zeros((0, d))
    return arr.reshape(-1, d)


@lru_cache(maxsize=64)
def _system(spec: FiniteVolumeSpec, phi: PairPotential, beta: float, z: float) -> OracleSystem:
    return OracleSystem(spec, phi, beta, z)


def oracle_system(spec: FiniteVolumeSpec, phi: PairPotential, beta: float, z: float) -> OracleSystem:
    return _system(spec, phi, float(beta), float(z))


def partition_function(spec: FiniteVolumeSpec, phi: PairPotential, beta: float, z: float) -> OracleValue:
    sys_ = oracle_system(spec, phi, beta, z)
    return OracleValue(sys_.Z, sys_.remainder, sys_.flagged)


def correlation_exact(spec: FiniteVolumeSpec, phi: PairPotential, beta: float, z: float, eta) -> float:
    return oracle_system(spec, phi, beta, z).correlation(eta)


def k_transform(G: FiniteConfigurationFunction, gamma) -> float:
    """(KG)(γ) = Σ_{η ⊆ γ} G(η), enumerated within the declared support bound."""
    if isinstance(gamma, Configuration):
        pts = gamma.positions.copy()
    else:
        arr = np.asarray(gamma, dtype=float)
        pts = arr if arr.ndim == 2 else arr.reshape(len(arr), -1)
    if G.region is not None and len(pts):
        pts = pts[np.array([bool(G.region(p)) for p in pts])]
    n = len(pts)
    kmax = n if G.max_cardinality is None else min(n, G.max_cardinality)
    if G.max_cardinality is None and n > SUBSET_LIMIT:
        raise OracleTractabilityError(
            f"full subset enumeration over {n} points refused (limit {SUBSET_LIMIT}); declare max_cardinality"
        )
    terms: List[float] = []
    for k in range(kmax + 1):
        for idx in itertools.combinations(range(n), k):
            terms.append(G(pts[list(idx)]))
    return math.fsum(terms)


@dataclass(frozen=True)
class BetaDerivativeCheck:
    lhs: float
    rhs: float

    @property
    def abs_error(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return self.abs_error / scale if scale > 0 else 0.0


def _beta_slope(spec, phi, z, beta, pts, h) -> float:
    def rho(b):
        return OracleSystem(spec, phi, b, z).correlation(pts)

    if beta >= h or not phi.singular_at_origin:
        def d(step):
            return (rho(beta + step) - rho(beta - step)) / (2.0 * step)
    else:
        def d(step):
            return (-3.0 * rho(beta) + 4.0 * rho(beta + step) - rho(beta + 2.0 * step)) / (2.0 * step)
    # Richardson: both stencils have an h² leading error
    return (4.0 * d(h / 2.0) - d(h)) / 3.0


def beta_derivative_check(spec: FiniteVolumeSpec, phi: PairPotential, z: float, beta: float, eta,
                          h: float = 1e-3) -> BetaDerivativeCheck:
    """Finite-difference ∂_β ρ(η) against the finite-volume formula, both by quadrature."""
    pts = _as_points(eta, spec.d)
    k = len(pts)
    sys_ = OracleSystem(spec, phi, beta, z)
    sys_._check_inside(pts)
    lhs = _beta_slope(spec, phi, z, beta, pts, h)

    rho_eta = sys_.correlation(pts)
    e_eta = sys_.energy(pts)
    nodes, w = sys_.nodes, sys_.weights
    g = len(w)
    eta_b = np.broadcast_to(pts, (g, k, spec.d))

    # ∫ W(η|x) ρ(η∪x) dx
    w_eta = np.zeros(g)
    for a in range(k):
        w_eta += sys_._pair_energy(pts[a][None, :], nodes)
    with_x = np.concatenate([eta_b, nodes[:, None, :]], axis=1)
    term_w = float(np.sum(w * w_eta * sys_.correlation_batch(with_x))) if k else 0.0

    # ½ ∫∫ φ(x−y) [ρ(η∪{x,y}) − ρ(η) ρ(x,y)] dx dy
    ii, jj = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    ww = w[ii] * w[jj]
    phi_xy = sys_._pair_energy(nodes[ii], nodes[jj])
    finite = np.isfinite(phi_xy)
    xy = np.stack([nodes[ii], nodes[jj]], axis=1)
    rho_xy = sys_.correlation_batch(xy)
    eta_xy = np.concatenate([np.broadcast_to(pts, (len(ii), k, spec.d)), xy], axis=1)
    rho_eta_xy = sys_.correlation_batch(eta_xy)
    integrand = np.where(finite, phi_xy * (rho_eta_xy - rho_eta * rho_xy), 0.0)
    term_pair = 0.5 * float(np.sum(ww * integrand))

    rhs = -e_eta * rho_eta - term_w - term_pair
    return BetaDerivativeCheck(lhs=float(lhs), rhs=float(rhs))
