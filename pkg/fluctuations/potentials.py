"""
fluctuations/potentials.py

Pair potentials and the integral functionals of φ used by the regime check and the
high-temperature expansion.

- Three isotropic kinds: the zero potential, a C² compact polynomial bump and a
  Lennard-Jones potential with a C² quintic tail on [r_switch, r_cut].
- Everything is driven by the radial profile (V, V'/r, V''), so value, gradient and
  Hessian come from the same code path and stay consistent.
- Integrals over R^d use the isotropic reduction to one radial integral and
  adaptive quadrature with absolute tolerance 1e-8.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, special

from fluctuations.errors import QuadratureError, SingularOriginError

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-8
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200


class PotentialKind(str, Enum):
    ZERO = "zero"
    BUMP = "bump"
    LENNARD_JONES = "lennard_jones"


def sphere_area(d: int) -> float:
    """Surface measure |S^{d-1}| of the unit sphere in R^d (2 for d=1)."""
    return 2.0 * math.pi ** (d / 2.0) / special.gamma(d / 2.0)


def sphere_average_n4(d: int) -> float:
    """Average of n_1^4 over the unit sphere."""
    return 3.0 / (d * (d + 2.0))


@dataclass(frozen=True)
class PairPotential:
    """
    Isotropic pair interaction φ(x) = V(|x|) on R^d.

    `stability_constant` is the configured B(φ) of the stability condition; it is
    metadata and never computed. `r_min` is the hard floor below which Lennard-Jones
    values are reported as +inf and dynamics refuse to step.
    """

    kind: PotentialKind
    dimension: int
    stability_constant: float = 0.0
    # bump: V(r) = height * (1 - r²/width²)³ for r < width
    height: float = 1.0
    width: float = 1.0
    # Lennard-Jones
    epsilon: float = 1.0
    sigma: float = 1.0
    r_cut: float = 2.5
    r_switch: Optional[float] = None
    r_min: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if int(self.dimension) < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))
        if self.stability_constant < 0:
            raise ValueError(f"stability_constant must be >= 0, got {self.stability_constant}")
        if self.kind is PotentialKind.BUMP:
            if self.width <= 0:
                raise ValueError(f"bump width must be > 0, got {self.width}")
        if self.kind is PotentialKind.LENNARD_JONES:
            if self.sigma <= 0 or self.epsilon < 0:
                raise ValueError(f"invalid LJ parameters epsilon={self.epsilon}, sigma={self.sigma}")
            r_switch = self.r_switch if self.r_switch is not None else self.r_cut - 0.5 * self.sigma
            r_min = self.r_min if self.r_min is not None else 0.5 * self.sigma
            if not (0 < r_min < r_switch < self.r_cut):
                raise ValueError(
                    f"need 0 < r_min < r_switch < r_cut, got {r_min}, {r_switch}, {self.r_cut}"
                )
            object.__setattr__(self, "r_switch", float(r_switch))
            object.__setattr__(self, "r_min", float(r_min))

    # ---------- constructors ----------
    @classmethod
    def zero(cls, dimension: int) -> "PairPotential":
        return cls(kind=PotentialKind.ZERO, dimension=dimension)

    @classmethod
    def bump(cls, dimension: int, height: float = 1.0, width: float = 1.0,
             stability_constant: float = 0.0) -> "PairPotential":
        return cls(kind=PotentialKind.BUMP, dimension=dimension, height=height, width=width,
                   stability_constant=stability_constant)

    @classmethod
    def lennard_jones(cls, dimension: int, epsilon: float = 1.0, sigma: float = 1.0,
                      r_cut: float = 2.5, r_switch: Optional[float] = None,
                      r_min: Optional[float] = None,
                      stability_constant: Optional[float] = None) -> "PairPotential":
        return cls(
            kind=PotentialKind.LENNARD_JONES, dimension=dimension, epsilon=epsilon, sigma=sigma,
            r_cut=r_cut, r_switch=r_switch, r_min=r_min,
            stability_constant=epsilon if stability_constant is None else stability_constant,
        )

    # ---------- metadata ----------
    @property
    def is_isotropic(self) -> bool:
        return True

    @property
    def is_zero(self) -> bool:
        return self.kind is PotentialKind.ZERO

    @property
    def singular_at_origin(self) -> bool:
        return self.kind is PotentialKind.LENNARD_JONES

    @property
    def interaction_range(self) -> float:
        if self.kind is PotentialKind.BUMP:
            return float(self.width)
        if self.kind is PotentialKind.LENNARD_JONES:
            return float(self.r_cut)
        return 0.0

    @property
    def hard_floor(self) -> float:
        return float(self.r_min) if self.kind is PotentialKind.LENNARD_JONES else 0.0

    @property
    def label(self) -> str:
        if self.kind is PotentialKind.BUMP:
            return f"bump(h={self.height:g},a={self.width:g},d={self.dimension})"
        if self.kind is PotentialKind.LENNARD_JONES:
            return f"lj(eps={self.epsilon:g},sigma={self.sigma:g},rc={self.r_cut:g},d={self.dimension})"
        return f"zero(d={self.dimension})"

    def breakpoints(self) -> List[float]:
        """Radii where the profile changes definition; radial quadrature splits there."""
        if self.kind is PotentialKind.BUMP:
            return [0.0, float(self.width)]
        if self.kind is PotentialKind.LENNARD_JONES:
            return [0.0, float(self.r_min), float(self.r_switch), float(self.r_cut)]
        return [0.0]

    # ---------- radial profile ----------
    @cached_property
    def _tail_coefficients(self) -> np.ndarray:
        """c3, c4, c5 of the tail p(r) = Σ c_k (r - r_cut)^k matching V, V', V'' at r_switch."""
        rs = float(self.r_switch)
        v, dv, d2v = self._lj_raw(np.array([rs]))
        u = rs - self.r_cut
        a = np.array([
            [u ** 3, u ** 4, u ** 5],
            [3 * u ** 2, 4 * u ** 3, 5 * u ** 4],
            [6 * u, 12 * u ** 2, 20 * u ** 3],
        ])
        return np.linalg.solve(a, np.array([v[0], dv[0], d2v[0]]))

    def _lj_raw(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        s6 = (self.sigma / r) ** 6
        s12 = s6 * s6
        v = 4.0 * self.epsilon * (s12 - s6)
        dv = 24.0 * self.epsilon * (s6 - 2.0 * s12) / r
        d2v = 4.0 * self.epsilon * (156.0 * s12 - 42.0 * s6) / r ** 2
        return v, dv, d2v

    def profile(self, r) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Return (V, V'/r, V'') at radii r (any shape).

        V'/r is returned instead of V' so that the gradient V'(r)·x/r needs no division
        and stays finite at r = 0 for smooth kinds. LJ radii at 0 yield inf/nan entries;
        callers guard with `hard_floor`.
        """
        r = np.asarray(r, dtype=float)
        v = np.zeros_like(r)
        dv_r = np.zeros_like(r)
        d2v = np.zeros_like(r)
        if self.kind is PotentialKind.ZERO:
            return v, dv_r, d2v

        if self.kind is PotentialKind.BUMP:
            a2 = self.width ** 2
            inside = r < self.width
            w = 1.0 - r[inside] ** 2 / a2
            v[inside] = self.height * w ** 3
            dv_r[inside] = -6.0 * self.height * w ** 2 / a2
            d2v[inside] = -6.0 * self.height / a2 * (w ** 2 - 4.0 * r[inside] ** 2 * w / a2)
            return v, dv_r, d2v

        core = r < self.r_switch
        tail = (r >= self.r_switch) & (r < self.r_cut)
        if np.any(core):
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                rv, rdv, rd2v = self._lj_raw(r[core])
                v[core] = rv
                dv_r[core] = rdv / r[core]
                d2v[core] = rd2v
        if np.any(tail):
            c3, c4, c5 = self._tail_coefficients
            u = r[tail] - self.r_cut
            v[tail] = c3 * u ** 3 + c4 * u ** 4 + c5 * u ** 5
            dv_r[tail] = (3 * c3 * u ** 2 + 4 * c4 * u ** 3 + 5 * c5 * u ** 4) / r[tail]
            d2v[tail] = 6 * c3 * u + 12 * c4 * u ** 2 + 20 * c5 * u ** 3
        return v, dv_r, d2v

    def energy_of_distance(self, r) -> np.ndarray:
        """V(r) with +inf below the hard floor (the zero-weight sentinel)."""
        r = np.asarray(r, dtype=float)
        v = self.profile(r)[0]
        if self.kind is PotentialKind.LENNARD_JONES:
            v = np.where(r < self.r_min, np.inf, v)
        return v

    def gradient_of_displacement(self, x: np.ndarray) -> np.ndarray:
        """∇φ(x) for displacements x of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        _, dv_r, _ = self.profile(r)
        return dv_r[..., None] * x

    def hessian_of_displacement(self, x: np.ndarray) -> np.ndarray:
        """∇²φ(x) for displacements x of shape (..., d); returns (..., d, d)."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        _, dv_r, d2v = self.profile(r)
        eye = np.eye(self.dimension)
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = np.einsum("...i,...j->...ij", x, x) / (r ** 2)[..., None, None]
        outer = np.where((r > 0)[..., None, None], outer, 0.0)
        return (d2v - dv_r)[..., None, None] * outer + dv_r[..., None, None] * eye


@dataclass
class PotentialMoments:
    int_phi: float
    int_x1d1_sq: float
    int_xkxl_didj_phi: np.ndarray
    mayer_C: float
    errors: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RegimeReport:
    C: float
    in_LAHT: bool
    error_estimate: float = 0.0


# ---------- point evaluation ----------
def _as_point(phi: PairPotential, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (phi.dimension,):
        raise ValueError(f"expected a point in R^{phi.dimension}, got shape {x.shape}")
    return x


def evaluate(phi: PairPotential, x) -> float:
    """φ(x); +inf below the LJ hard floor, SingularOriginError at x = 0 for LJ."""
    x = _as_point(phi, x)
    r = float(np.linalg.norm(x))
    if phi.singular_at_origin and r == 0.0:
        raise SingularOriginError(f"{phi.label} is singular at the origin")
    return float(phi.energy_of_distance(np.array([r]))[0])


def derivatives(phi: PairPotential, x) -> Tuple[np.ndarray, np.ndarray]:
    """(∇φ(x), ∇²φ(x)); the LJ formulas are used as-is below r_min."""
    x = _as_point(phi, x)
    if phi.singular_at_origin and not np.any(x):
        raise SingularOriginError(f"{phi.label} is singular at the origin")
    return phi.gradient_of_displacement(x), phi.hessian_of_displacement(x)


# ---------- radial quadrature ----------
def radial_integral(phi: PairPotential, g: Callable[[float], float], power: int = 0,
                    r_max: Optional[float] = None, label: str = "radial integral",
                    extra_breaks: Optional[List[float]] = None) -> Tuple[float, float]:
    """
    ∫ g(r) r^{power} r^{d-1} dr over [0, r_max] split at the potential's breakpoints.

    Multiply by `sphere_area(d)` for a full R^d integral. Raises QuadratureError when
    scipy reports non-convergence or the error estimate exceeds the tolerance.
    """
    d = phi.dimension
    r_end = phi.interaction_range if r_max is None else float(r_max)
    if r_end <= 0.0:
        return 0.0, 0.0
    breaks = sorted({b for b in phi.breakpoints() + list(extra_breaks or []) if 0.0 <= b < r_end} | {0.0, r_end})

    def integrand(r: float) -> float:
        return g(r) * r ** (power + d - 1)

    total, err_total = 0.0, 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        result = integrate.quad(integrand, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                                limit=QUAD_LIMIT, full_output=1)
        value, err = result[0], result[1]
        if len(result) > 3 or not math.isfinite(value):
            raise QuadratureError(f"{label} did not converge on [{lo:g}, {hi:g}]", err)
        total += value
        err_total += err
    if err_total > max(10 * QUAD_EPSABS * len(breaks), 1e-8 * abs(total)):
        raise QuadratureError(f"{label} exceeded tolerance", err_total)
    return total, err_total


def _mayer_abs(phi: PairPotential, beta: float) -> Callable[[float], float]:
    def g(r: float) -> float:
        if phi.kind is PotentialKind.LENNARD_JONES and r < phi.r_min:
            return 1.0
        v = float(phi.profile(np.array([r]))[0][0])
        return abs(math.expm1(-beta * v))
    return g


def regime_check(phi: PairPotential, beta: float, z: float) -> RegimeReport:
    """C(βφ, z) = z·e^{2βB}·∫|e^{−βφ} − 1| dx and the LA-HT flag C < e^{-1}."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    if z <= 0:
        raise ValueError(f"z must be > 0, got {z}")
    if phi.is_zero or beta == 0.0:
        return RegimeReport(C=0.0, in_LAHT=True)
    integral, err = radial_integral(phi, _mayer_abs(phi, beta), label="mayer integral")
    scale = z * math.exp(2.0 * beta * phi.stability_constant) * sphere_area(phi.dimension)
    c = scale * integral
    report = RegimeReport(C=c, in_LAHT=c < math.exp(-1.0), error_estimate=scale * err)
    if not report.in_LAHT:
        logger.warning("regime_check: %s at beta=%g z=%g outside LA-HT (C=%.4g)", phi.label, beta, z, c)
    return report


def bump_integral(phi: PairPotential) -> float:
    """Closed form ∫φ for the polynomial bump: h·a^d·|S^{d-1}|·B(d/2, 4)/2."""
    if phi.kind is not PotentialKind.BUMP:
        raise ValueError(f"closed-form integral only for bump, got {phi.kind.value}")
    d = phi.dimension
    return phi.height * phi.width ** d * sphere_area(d) * special.beta(d / 2.0, 4.0) / 2.0


def moments(phi: PairPotential, beta: float) -> PotentialMoments:
    """
    The functionals of φ consumed by the expansion.

    int_xkxl_didj_phi uses the isotropic reduction
    T_ijkl = A (δ_ij δ_kl + δ_ik δ_jl + δ_il δ_jk) + C δ_ij δ_kl.
    """
    d = phi.dimension
    if phi.is_zero:
        return PotentialMoments(0.0, 0.0, np.zeros((d, d, d, d)), 0.0,
                                {"int_phi": 0.0, "int_x1d1_sq": 0.0, "tensor": 0.0, "mayer_C": 0.0})
    if phi.singular_at_origin:
        raise ValueError(f"moments of {phi.label} diverge at the origin")

    area = sphere_area(d)

    def v(r):
        return float(phi.profile(np.array([r]))[0][0])

    def dv_r(r):
        return float(phi.profile(np.array([r]))[1][0])

    def d2v(r):
        return float(phi.profile(np.array([r]))[2][0])

    i_phi, e_phi = radial_integral(phi, v, label="int_phi")
    # (x¹∂₁φ)² = r² V'² n₁⁴
    k_raw, e_k = radial_integral(phi, lambda r: (dv_r(r) * r) ** 2, power=2, label="int_x1d1_sq")
    a_raw, e_a = radial_integral(phi, lambda r: d2v(r) - dv_r(r), power=2, label="tensor A")
    c_raw, e_c = radial_integral(phi, dv_r, power=2, label="tensor C")

    n4 = sphere_average_n4(d)
    a_coef = area * a_raw / (d * (d + 2.0))
    c_coef = area * c_raw / d
    eye = np.eye(d)
    tensor = (
        a_coef * (np.einsum("ij,kl->ijkl", eye, eye) + np.einsum("ik,jl->ijkl", eye, eye)
                  + np.einsum("il,jk->ijkl", eye, eye))
        + c_coef * np.einsum("ij,kl->ijkl", eye, eye)
    )
    regime = regime_check(phi, beta, 1.0) if beta > 0 else RegimeReport(0.0, True)
    return PotentialMoments(
        int_phi=area * i_phi,
        int_x1d1_sq=area * n4 * k_raw,
        int_xkxl_didj_phi=tensor,
        mayer_C=regime.C,
        errors={
            "int_phi": area * e_phi,
            "int_x1d1_sq": area * n4 * e_k,
            "tensor": area * (e_a + e_c),
            "mayer_C": regime.error_estimate,
        },
    )
