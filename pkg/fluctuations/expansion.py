"""
fluctuations/expansion.py

High-temperature coefficient functions of an isotropic pair potential:
- χ = ρ⁽¹⁾ + ∫u⁽²⁾, bulk diffusion ρ⁽¹⁾/χ,
- D = ρ⁽¹⁾ + ½∫β·x¹x¹·∂₁∂₁φ(x)·ρ⁽²⁾(x)dx, R = D − (ρ⁽¹⁾)²/χ,
- curvatures at β = 0 from the moments of φ,
- both sides of the coercivity identity for F = ⟨f, ·⟩ over a sampled ensemble.

ρ⁽²⁾ comes from an approximant: Boltzmann factor, the three-particle cluster series
(exact through β²), or interpolated Monte Carlo / oracle profiles.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import fft, interpolate, special

from fluctuations.configuration import Configuration, close_pairs, drift, pair_displacements
from fluctuations.errors import ClosePairError
from fluctuations.gibbs import EnsembleStats
from fluctuations.oracle import OracleSystem
from fluctuations.potentials import PairPotential, moments, sphere_area
from fluctuations.scaling import TestFunction
from fluctuations.stats import Estimate, mean_estimate

logger = logging.getLogger(__name__)

ORDERS = ("boltzmann", "cluster", "mc_interpolated", "oracle_interpolated")
SOURCE_OF_ORDER = {
    "boltzmann": "low_beta_analytic",
    "cluster": "low_beta_analytic",
    "mc_interpolated": "mc_backed",
    "oracle_interpolated": "oracle_backed",
}
CLUSTER_GRID = {1: 8192, 2: 1024, 3: 128}

RadialFn = Callable[[np.ndarray], np.ndarray]


# ---------- radial quadrature ----------
@lru_cache(maxsize=8)
def _gl(order: int):
    return special.roots_legendre(order)


def radial_quadrature(fn: RadialFn, d: int, breaks: Sequence[float], panels: int = 64, order: int = 16) -> float:
    """|S^{d−1}|·∫ fn(r) r^{d−1} dr with composite Gauss–Legendre between sorted breakpoints."""
    t, w = _gl(order)
    pts = sorted(set(float(b) for b in breaks))
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        r = (mid[:, None] + half[:, None] * t[None, :]).ravel()
        wr = (half[:, None] * w[None, :]).ravel()
        vals = np.asarray(fn(r), dtype=float) * r ** (d - 1)
        total += float(np.sum(wr * vals))
    return sphere_area(d) * total


def _mayer(phi: PairPotential, beta: float, r: np.ndarray) -> np.ndarray:
    if phi.is_zero or beta == 0.0:
        return np.zeros_like(np.asarray(r, dtype=float))
    v = phi.energy_of_distance(r)
    with np.errstate(over="ignore", invalid="ignore"):
        f = np.expm1(-beta * v)
    return np.where(np.isinf(v), -1.0, f)


def _boltzmann(phi: PairPotential, beta: float, r: np.ndarray) -> np.ndarray:
    return 1.0 + _mayer(phi, beta, r)


# ---------- cluster series ----------
@dataclass(frozen=True)
class ClusterSeries:
    """Mayer series through three-particle graphs at activity z; f = e^{−βφ} − 1."""

    z: float
    beta: float
    int_f: float
    int_f_ff: float
    radii: np.ndarray
    conv: np.ndarray

    @property
    def rho1(self) -> float:
        z, i = self.z, self.int_f
        return z + z ** 2 * i + z ** 3 * (1.5 * i * i + 0.5 * self.int_f_ff)

    @property
    def chi(self) -> float:
        z, i = self.z, self.int_f
        return z + 2.0 * z ** 2 * i + 3.0 * z ** 3 * (1.5 * i * i + 0.5 * self.int_f_ff)

    def conv_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        spline = interpolate.interp1d(self.radii, self.conv, kind="cubic", bounds_error=False, fill_value=0.0)
        return spline(r)


def cluster_series(phi: PairPotential, beta: float, z: float = 1.0,
                   points_per_dim: Optional[int] = None) -> ClusterSeries:
    """∫f by radial quadrature; f∗f by FFT convolution on a Cartesian grid around the origin."""
    d = phi.dimension
    a = phi.interaction_range
    if phi.is_zero or beta == 0.0 or a <= 0.0:
        return ClusterSeries(z, beta, 0.0, 0.0, np.array([0.0, 1.0]), np.zeros(2))
    if beta < 0.0 and phi.singular_at_origin:
        raise ValueError(f"negative beta is meaningless for {phi.label}")
    n = int(points_per_dim or CLUSTER_GRID.get(d, 64))
    half_width = 2.1 * a
    h = 2.0 * half_width / n
    axis = np.fft.fftfreq(n, d=1.0 / (n * h))
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    r = np.sqrt(sum(g ** 2 for g in grids))
    f = _mayer(phi, beta, r)
    conv = fft.irfftn(fft.rfftn(f) ** 2, s=f.shape) * h ** d

    breaks = phi.breakpoints() + [a]
    int_f = radial_quadrature(lambda rr: _mayer(phi, beta, rr), d, breaks)
    int_f_ff = float(np.sum(f * conv)) * h ** d
    line = (slice(0, n // 2),) + (0,) * (d - 1)
    radii = axis[: n // 2]
    profile = conv[line]
    keep = radii <= 2.0 * a + 2.0 * h
    return ClusterSeries(z, beta, int_f, int_f_ff, radii[keep].copy(), profile[keep].copy())


# ---------- approximants ----------
@dataclass
class Rho2Approximant:
    """Radial ρ⁽²⁾(β, z, r) with its order tag; `u2` overrides ρ⁽²⁾ − ρ⁽¹⁾² when present."""

    evaluator: RadialFn
    order: str
    rho1: float = 1.0
    u2: Optional[RadialFn] = None
    r_max: Optional[float] = None
    breaks: List[float] = field(default_factory=list)
    note: str = ""

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"unknown approximant order {self.order!r}; expected one of {ORDERS}")

    def __call__(self, r) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(r, dtype=float)), dtype=float)

    def connected(self, r) -> np.ndarray:
        if self.u2 is not None:
            return np.asarray(self.u2(np.asarray(r, dtype=float)), dtype=float)
        return self(r) - self.rho1 ** 2

    @property
    def source(self) -> str:
        return SOURCE_OF_ORDER[self.order]

    @classmethod
    def boltzmann(cls, phi: PairPotential, beta: float, rho1: float = 1.0) -> "Rho2Approximant":
        return cls(
            evaluator=lambda r: rho1 ** 2 * _boltzmann(phi, beta, r),
            order="boltzmann",
            rho1=rho1,
            r_max=phi.interaction_range,
            breaks=phi.breakpoints(),
            note="error O(C(beta*phi, 1))",
        )

    @classmethod
    def cluster(cls, phi: PairPotential, beta: float, z: float = 1.0,
                points_per_dim: Optional[int] = None) -> "Rho2Approximant":
        cs = cluster_series(phi, beta, z, points_per_dim)

        def rho2(r):
            return z ** 2 * _boltzmann(phi, beta, r) * (1.0 + z * (2.0 * cs.int_f + cs.conv_at(r)))

        def u2(r):
            f = _mayer(phi, beta, r)
            conv = cs.conv_at(r)
            return z ** 2 * f + z ** 3 * (2.0 * f * cs.int_f + (1.0 + f) * conv)

        a = phi.interaction_range
        return cls(rho2, "cluster", cs.rho1, u2, 2.0 * a, phi.breakpoints() + [a, 2.0 * a],
                   note="exact through beta^2")

    @classmethod
    def from_mc(cls, stats: EnsembleStats) -> "Rho2Approximant":
        centers = stats.bin_centers
        rho1 = stats.rho1.value
        spline = interpolate.interp1d(centers, stats.rho2, kind="linear", bounds_error=False,
                                      fill_value=(float(stats.rho2[0]), rho1 ** 2))
        edges = stats.bin_edges
        return cls(spline, "mc_interpolated", rho1, None, float(edges[-1]),
                   [float(edges[0])] + centers.tolist() + [float(edges[-1])],
                   note=f"{stats.n_samples} samples, {len(centers)} bins")

    @classmethod
    def from_oracle(cls, system: OracleSystem, r_max: Optional[float] = None,
                    n_points: int = 48) -> "Rho2Approximant":
        length = system.spec.length
        reach = min(length / 2.0, r_max if r_max is not None else 2.0 * system.phi.interaction_range)
        radii = np.linspace(0.0, reach, n_points)
        profile = system.pair_profile(radii)
        rho1 = float(system.density_profile(np.full((1, system.spec.d), length / 2.0))[0])
        spline = interpolate.interp1d(radii, profile, kind="cubic", bounds_error=False,
                                      fill_value=(float(profile[0]), rho1 ** 2))
        return cls(spline, "oracle_interpolated", rho1, None, reach,
                   system.phi.breakpoints() + [reach],
                   note=f"oracle n_max={system.spec.n_max} L={length:g}")


# ---------- coefficients ----------
@dataclass(frozen=True)
class ExpansionCoefficients:
    rho1: float
    chi: float
    bulk_diffusion: float
    d_phi: float
    r_phi: float
    source: str
    order: str = "boltzmann"
    beta: float = 0.0

    def as_row(self) -> Dict[str, object]:
        return {
            "beta": self.beta, "source": self.source, "order": self.order, "rho1": self.rho1,
            "chi": self.chi, "bulk_diffusion": self.bulk_diffusion, "d_phi": self.d_phi, "r_phi": self.r_phi,
        }


def _x1d11_profile(phi: PairPotential) -> RadialFn:
    """Angular average of x₁²∂₁₁φ at radius r: r²[(V″ − V′/r)·3/(d(d+2)) + (V′/r)/d]."""
    d = phi.dimension
    n4 = 3.0 / (d * (d + 2.0))

    def g(r):
        _, dv_r, d2v = phi.profile(r)
        return r ** 2 * ((d2v - dv_r) * n4 + dv_r / d)
    return g


def coefficients(phi: PairPotential, beta: float, rho2: Rho2Approximant,
                 rho1: Optional[float] = None) -> ExpansionCoefficients:
    if not phi.is_isotropic:
        raise ValueError("coefficients need an isotropic potential")
    d = phi.dimension
    rho1 = rho2.rho1 if rho1 is None else float(rho1)
    reach = rho2.r_max if rho2.r_max is not None else phi.interaction_range
    if reach > 0.0:
        breaks = [0.0, reach] + [b for b in rho2.breaks if 0.0 < b < reach]
        chi = rho1 + radial_quadrature(rho2.connected, d, breaks)
    else:
        chi = rho1
    if phi.is_zero or beta == 0.0:
        d_phi = rho1
    else:
        a = phi.interaction_range
        kernel = _x1d11_profile(phi)
        breaks = [0.0, a] + [b for b in phi.breakpoints() if 0.0 < b < a]
        if phi.hard_floor > 0.0:
            # ρ⁽²⁾ vanishes below the hard floor
            breaks = [phi.hard_floor, a] + [b for b in breaks if phi.hard_floor < b < a]
        d_phi = rho1 + 0.5 * beta * radial_quadrature(lambda r: kernel(r) * rho2(r), d, breaks)
    if chi <= 0.0:
        raise ValueError(f"non-positive compressibility {chi:.6g} from the {rho2.order} approximant at beta={beta}")
    return ExpansionCoefficients(
        rho1=rho1,
        chi=chi,
        bulk_diffusion=rho1 / chi,
        d_phi=d_phi,
        r_phi=d_phi - rho1 ** 2 / chi,
        source=rho2.source,
        order=rho2.order,
        beta=float(beta),
    )


def approximant(phi: PairPotential, beta: float, order: str = "cluster", z: float = 1.0) -> Rho2Approximant:
    """Analytic approximants by order tag; interpolated orders need data and have their own constructors."""
    if order == "boltzmann":
        return Rho2Approximant.boltzmann(phi, beta, rho1=z)
    if order == "cluster":
        return Rho2Approximant.cluster(phi, beta, z)
    raise ValueError(f"order {order!r} needs sampled or oracle data; use Rho2Approximant.from_mc/from_oracle")


# ---------- curvature at β = 0 ----------
@dataclass(frozen=True)
class Curvature:
    d2_D: float
    d2_compress: float
    d2_R: float


def curvature_at_zero(phi: PairPotential) -> Curvature:
    """
    d²D/dβ²(0) = ∫(x¹∂₁φ)² − (∫φ)², d²[(ρ⁽¹⁾)²/χ]/dβ²(0) = −(∫φ)².

    d2_R = 2∫(x¹∂₁φ)², the coefficient convention in which R(β) = β²∫(x¹∂₁φ)² + o(β²).
    """
    if phi.is_zero:
        return Curvature(0.0, 0.0, 0.0)
    m = moments(phi, 0.0)
    i2 = m.int_phi ** 2
    return Curvature(m.int_x1d1_sq - i2, -i2, 2.0 * m.int_x1d1_sq)


def leading_remainder(phi: PairPotential, beta: float, convention: str = "leading") -> float:
    """β² coefficient of R: "leading" uses β²∫(x¹∂₁φ)², "taylor" uses β²/2·(d2_D − d2_compress)."""
    c = curvature_at_zero(phi)
    if convention == "leading":
        return beta ** 2 * c.d2_R / 2.0
    if convention == "taylor":
        return 0.5 * beta ** 2 * (c.d2_D - c.d2_compress)
    raise ValueError(f"unknown convention {convention!r}; expected 'leading' or 'taylor'")


@dataclass(frozen=True)
class CurvatureEstimate:
    betas: tuple
    d2_D: float
    d2_compress: float
    d2_R: float


def curvature_finite_difference(phi: PairPotential, build: Callable[[float], Rho2Approximant],
                                betas: Sequence[float]) -> CurvatureEstimate:
    """Second differences of D and (ρ⁽¹⁾)²/χ over three equally spaced β values."""
    if len(betas) != 3:
        raise ValueError(f"need three beta values, got {len(betas)}")
    b0, b1, b2 = (float(b) for b in betas)
    h = b1 - b0
    if h <= 0 or not math.isclose(b2 - b1, h, rel_tol=1e-9):
        raise ValueError(f"beta values must be increasing and equally spaced, got {betas}")
    coeffs = [coefficients(phi, b, build(b)) for b in (b0, b1, b2)]
    dd = [c.d_phi for c in coeffs]
    cc = [c.rho1 ** 2 / c.chi for c in coeffs]
    d2_d = (dd[0] - 2.0 * dd[1] + dd[2]) / h ** 2
    d2_c = (cc[0] - 2.0 * cc[1] + cc[2]) / h ** 2
    return CurvatureEstimate((b0, b1, b2), d2_d, d2_c, d2_d - d2_c)


# ---------- coercivity identity ----------
@dataclass(frozen=True)
class CoercivitySides:
    lhs: Estimate
    rhs: Estimate
    difference: Estimate
    n_samples: int

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.lhs.stderr, self.rhs.stderr)

    def agrees(self, n_sigma: float = 3.0) -> bool:
        return abs(self.lhs.value - self.rhs.value) <= n_sigma * self.combined_stderr


def _coercivity_sample(c: Configuration, f: TestFunction, phi: PairPotential, beta: float):
    if c.n == 0:
        return 0.0, 0.0
    x = c.positions
    grad_f = f.gradient(x)
    b = drift(c, phi, beta).vectors
    h_f = -math.fsum(f.laplacian(x)) - math.fsum(np.einsum("pk,pk->p", b, grad_f))
    hess = f.hessian(x)
    rhs = math.fsum(np.sum(hess ** 2, axis=(1, 2)))
    if beta != 0.0 and not phi.is_zero and c.n >= 2:
        pl = pair_displacements(c, phi.interaction_range)
        if len(pl):
            if phi.hard_floor > 0.0:
                bad, dist = close_pairs(pl, phi.hard_floor)
                if bad:
                    raise ClosePairError(bad, dist, phi.hard_floor)
            g = grad_f[pl.i] - grad_f[pl.j]
            curv = np.einsum("pk,pkl,pl->p", g, phi.hessian_of_displacement(pl.disp), g)
            rhs += beta * math.fsum(curv)
    return h_f ** 2, rhs


def coercivity_sides(f: TestFunction, ensemble: Sequence[Configuration], phi: PairPotential,
                     beta: float) -> CoercivitySides:
    """
    lhs = E[(H_μ⟨f,·⟩)²] with H_μ⟨f,·⟩(γ) = −Σ_x Δf(x) − Σ_x (B(γ,x), ∇f(x));
    rhs = E[Σ_x ‖∇²f(x)‖²_HS + β·Σ_{pairs}(∇f(x)−∇f(y), ∇²φ(x−y)(∇f(x)−∇f(y)))].
    """
    if not ensemble:
        raise ValueError("coercivity_sides needs a non-empty ensemble")
    f.check_support(ensemble[0].torus)
    pairs = np.array([_coercivity_sample(c, f, phi, beta) for c in ensemble])
    lhs = mean_estimate(pairs[:, 0])
    rhs = mean_estimate(pairs[:, 1])
    diff = mean_estimate(pairs[:, 0] - pairs[:, 1])
    return CoercivitySides(lhs, rhs, diff, len(ensemble))


def poisson_coercivity(f: TestFunction, z: float) -> tuple:
    """Closed-form (lhs, rhs) over the Poisson measure: (z‖Δf‖², z‖∇²f‖²_HS); ∫Δf = 0 on the torus."""
    return z * f.lap_norm_sq, z * f.hess_norm_sq


# ---------- tables ----------
def coefficient_table(phi: PairPotential, potential_id: str, betas: Sequence[float],
                      orders: Sequence[str] = ("boltzmann", "cluster"), z: float = 1.0,
                      extra: Optional[Dict[str, Callable[[float], Rho2Approximant]]] = None) -> List[Dict[str, object]]:
    """One row per (β, order); `extra` maps further order tags to approximant builders."""
    builders: Dict[str, Callable[[float], Rho2Approximant]] = {
        o: (lambda b, o=o: approximant(phi, b, o, z)) for o in orders if o in ("boltzmann", "cluster")
    }
    builders.update(extra or {})
    rows: List[Dict[str, object]] = []
    for beta in betas:
        for order, build in builders.items():
            coeffs = coefficients(phi, beta, build(beta))
            rows.append({"potential": potential_id, **coeffs.as_row()})
    return rows
