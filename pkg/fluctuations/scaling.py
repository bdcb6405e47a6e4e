"""
fluctuations/scaling.py

Scaling maps, test functions, fluctuation-field pairings and Hermite/Sobolev machinery.

- s_in: positions multiplied by ε, so a box of side L₀/ε maps onto the fixed torus L₀.
- fluctuation_field: ε^{d/2}(Σ_{x∈s_in(γ)} f(x) − ρ⁽¹⁾ε^{−d}∫f).
- Test functions: torus Fourier modes, compact C³ bumps (1 − r²/R²)⁴ and Hermite
  proxies e_n(x − c); each carries f, ∇f, ∇²f, Δf and precomputed L² norms.
- Hermite functions via the normalized three-term recurrence run on the polynomial
  part with running rescaling (log-domain), so large |x| underflows cleanly to 0.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from fluctuations import store
from fluctuations.configuration import Configuration, Torus
from fluctuations.errors import SupportError
from fluctuations.potentials import sphere_area

logger = logging.getLogger(__name__)


# ---------- Hermite functions ----------
def hermite_table(n_max: int, x) -> np.ndarray:
    """Normalized Hermite functions ψ_0..ψ_{n_max} at points x; shape (n_max + 1, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n_max + 1, x.size))
    p_prev = np.zeros_like(x)
    p_cur = np.full_like(x, math.pi ** -0.25)
    log_scale = np.zeros_like(x)
    gauss = -0.5 * x ** 2
    out[0] = p_cur * np.exp(gauss)
    for n in range(n_max):
        p_next = math.sqrt(2.0 / (n + 1)) * x * p_cur - math.sqrt(n / (n + 1)) * p_prev
        p_prev, p_cur = p_cur, p_next
        big = np.maximum(np.abs(p_cur), np.abs(p_prev))
        rescale = big > 1e100
        if np.any(rescale):
            p_cur = np.where(rescale, p_cur / np.where(rescale, big, 1.0), p_cur)
            p_prev = np.where(rescale, p_prev / np.where(rescale, big, 1.0), p_prev)
            log_scale = log_scale + np.where(rescale, np.log(np.where(rescale, big, 1.0)), 0.0)
        out[n + 1] = p_cur * np.exp(log_scale + gauss)
    return out


def hermite_eval(i, x) -> np.ndarray | float:
    """e_i(x) as a tensor product of 1-d Hermite functions; i is an int or multi-index."""
    idx = (int(i),) if np.isscalar(i) else tuple(int(v) for v in i)
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim <= 1 and (pts.size == len(idx))
    pts = pts.reshape(-1, len(idx))
    val = np.ones(len(pts))
    for dim, n in enumerate(idx):
        val = val * hermite_table(n, pts[:, dim])[n]
    return float(val[0]) if scalar else val


@lru_cache(maxsize=32)
def hermite_integrals(n_max: int) -> np.ndarray:
    """∫_R ψ_n dx for n = 0..n_max by Gauss–Hermite quadrature of the polynomial part."""
    y, w = special.roots_hermite(n_max + 40)
    x = math.sqrt(2.0) * y
    # ψ_n(√2 y) e^{y²} is a polynomial in y, integrated exactly against e^{−y²}
    table = hermite_table(n_max, x)
    vals = math.sqrt(2.0) * (table * np.exp(y ** 2)[None, :]) @ w
    return vals


def hermite_index_set(d: int, max_level: int) -> List[Tuple[int, ...]]:
    """Multi-indices with |n| <= max_level ordered by eigenvalue 2|n| + d, then lexicographically."""
    idx = [n for n in itertools.product(range(max_level + 1), repeat=d) if sum(n) <= max_level]
    return sorted(idx, key=lambda n: (sum(n), n))


# ---------- test functions ----------
class TestFunction:
    """Smooth function on the scaled torus with derivative evaluators and L² norms."""

    __test__ = False  # not a pytest class

    kind: str = ""
    d: int = 1
    id: str = ""

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)

    @property
    def integral(self) -> float:
        raise NotImplementedError

    @property
    def norm0_sq(self) -> float:
        raise NotImplementedError

    @property
    def grad_norm_sq(self) -> float:
        raise NotImplementedError

    @property
    def lap_norm_sq(self) -> float:
        raise NotImplementedError

    @property
    def hess_norm_sq(self) -> float:
        raise NotImplementedError

    def check_support(self, torus: Torus) -> None:
        pass

    def quadrature_box(self) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


def _points(x, d: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, d)


@dataclass(frozen=True)
class FourierMode(TestFunction):
    """A cos(q·x) or A sin(q·x) with q = 2πk/L₀ on the torus of side L₀."""

    k: Tuple[int, ...]
    period: float
    phase: str = "cos"
    amplitude: float = 1.0
    id: str = ""
    kind: str = field(default="fourier", init=False)

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        if self.phase not in ("cos", "sin"):
            raise ValueError(f"phase must be 'cos' or 'sin', got {self.phase!r}")
        if self.period <= 0:
            raise ValueError(f"period must be > 0, got {self.period}")
        if not self.id:
            object.__setattr__(self, "id", f"{self.phase}{'_'.join(map(str, self.k))}")

    @property
    def d(self) -> int:
        return len(self.k)

    @cached_property
    def q(self) -> np.ndarray:
        return 2.0 * math.pi * np.array(self.k, dtype=float) / self.period

    @property
    def q_sq(self) -> float:
        return float(self.q @ self.q)

    @property
    def is_constant(self) -> bool:
        return not any(self.k)

    def _arg(self, x):
        return _points(x, self.d) @ self.q

    def value(self, x):
        a = self._arg(x)
        return self.amplitude * (np.cos(a) if self.phase == "cos" else np.sin(a))

    def gradient(self, x):
        a = self._arg(x)
        s = -np.sin(a) if self.phase == "cos" else np.cos(a)
        return self.amplitude * s[:, None] * self.q[None, :]

    def hessian(self, x):
        return -self.value(x)[:, None, None] * np.outer(self.q, self.q)[None, :, :]

    def laplacian(self, x):
        return -self.q_sq * self.value(x)

    def rotated(self) -> "FourierMode":
        """The mode g with ∇f = q·g (cos → −sin, sin → cos)."""
        if self.phase == "cos":
            return FourierMode(self.k, self.period, "sin", -self.amplitude, self.id + "'")
        return FourierMode(self.k, self.period, "cos", self.amplitude, self.id + "'")

    @property
    def integral(self) -> float:
        if self.is_constant and self.phase == "cos":
            return self.amplitude * self.period ** self.d
        return 0.0

    @property
    def norm0_sq(self) -> float:
        vol = self.period ** self.d
        if self.is_constant:
            return self.amplitude ** 2 * vol if self.phase == "cos" else 0.0
        return self.amplitude ** 2 * vol / 2.0

    @property
    def grad_norm_sq(self) -> float:
        return self.q_sq * self.norm0_sq

    @property
    def lap_norm_sq(self) -> float:
        return self.q_sq ** 2 * self.norm0_sq

    @property
    def hess_norm_sq(self) -> float:
        return self.q_sq ** 2 * self.norm0_sq

    def check_support(self, torus: Torus) -> None:
        if torus.d != self.d or not math.isclose(torus.L, self.period, rel_tol=1e-12):
            raise SupportError(
                f"Fourier mode {self.id} with period {self.period:g} is not periodic on a torus of side {torus.L:g}"
            )

    def quadrature_box(self):
        return np.zeros(self.d), np.full(self.d, self.period)


class _RadialFunction(TestFunction):
    """f(x) = g(|x − c|) evaluated with the minimum image when `period` is set."""

    center: Tuple[float, ...]
    period: Optional[float]

    def _rel(self, x) -> np.ndarray:
        dx = _points(x, self.d) - np.asarray(self.center, dtype=float)[None, :]
        if self.period:
            dx = dx - self.period * np.floor(dx / self.period + 0.5)
        return dx

    def radial(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(g, g'/r, g'')."""
        raise NotImplementedError

    def value(self, x):
        return self.radial(np.linalg.norm(self._rel(x), axis=1))[0]

    def gradient(self, x):
        dx = self._rel(x)
        return self.radial(np.linalg.norm(dx, axis=1))[1][:, None] * dx

    def hessian(self, x):
        dx = self._rel(x)
        r = np.linalg.norm(dx, axis=1)
        _, g1r, g2 = self.radial(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            nn = np.einsum("pi,pj->pij", dx, dx) / (r ** 2)[:, None, None]
        nn = np.where((r > 0)[:, None, None], nn, 0.0)
        return (g2 - g1r)[:, None, None] * nn + g1r[:, None, None] * np.eye(self.d)[None]

    def laplacian(self, x):
        r = np.linalg.norm(self._rel(x), axis=1)
        _, g1r, g2 = self.radial(r)
        return g2 + (self.d - 1) * g1r

    def _radial_quad(self, fn: Callable[[np.ndarray], np.ndarray], r_max: float) -> float:
        def integrand(r):
            return float(fn(np.array([r]))[0]) * r ** (self.d - 1)
        val, _ = integrate.quad(integrand, 0.0, r_max, epsabs=1e-12, epsrel=1e-12, limit=200)
        return sphere_area(self.d) * val


@dataclass(frozen=True)
class CompactBump(_RadialFunction):
    """A (1 − |x − c|²/R²)⁴ on |x − c| < R; C³ across the support boundary."""

    center: Tuple[float, ...]
    radius: float
    amplitude: float = 1.0
    period: Optional[float] = None
    id: str = ""
    kind: str = field(default="bump", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if self.radius <= 0:
            raise ValueError(f"bump radius must be > 0, got {self.radius}")
        if not self.id:
            object.__setattr__(self, "id", f"bump_r{self.radius:g}")

    @property
    def d(self) -> int:
        return len(self.center)

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        a, big_r2 = self.amplitude, self.radius ** 2
        inside = r < self.radius
        w = np.where(inside, 1.0 - r ** 2 / big_r2, 0.0)
        g = a * w ** 4
        g1r = -8.0 * a * w ** 3 / big_r2
        g2 = -8.0 * a / big_r2 * (w ** 3 - 6.0 * r ** 2 * w ** 2 / big_r2)
        return g, g1r, np.where(inside, g2, 0.0)

    @property
    def integral(self) -> float:
        d = self.d
        return self.amplitude * self.radius ** d * sphere_area(d) * special.beta(d / 2.0, 5.0) / 2.0

    @property
    def norm0_sq(self) -> float:
        d = self.d
        return self.amplitude ** 2 * self.radius ** d * sphere_area(d) * special.beta(d / 2.0, 9.0) / 2.0

    @property
    def grad_norm_sq(self) -> float:
        d = self.d
        return (64.0 * self.amplitude ** 2 * self.radius ** (d - 2) * sphere_area(d)
                * special.beta(d / 2.0 + 1.0, 7.0) / 2.0)

    @cached_property
    def lap_norm_sq(self) -> float:
        def lap(r):
            _, g1r, g2 = self.radial(r)
            return (g2 + (self.d - 1) * g1r) ** 2
        return self._radial_quad(lap, self.radius)

    @cached_property
    def hess_norm_sq(self) -> float:
        def hs(r):
            _, g1r, g2 = self.radial(r)
            return g2 ** 2 + (self.d - 1) * g1r ** 2
        return self._radial_quad(hs, self.radius)

    def check_support(self, torus: Torus) -> None:
        if torus.d != self.d or 2.0 * self.radius >= torus.L:
            raise SupportError(f"bump {self.id} (radius {self.radius:g}) does not fit a torus of side {torus.L:g}")

    def quadrature_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class HermiteProxy(TestFunction):
    """Hermite function e_n(x − c); its effective support is sqrt(2|n| + d) + margin."""

    index: Tuple[int, ...]
    center: Tuple[float, ...]
    period: Optional[float] = None
    margin: float = 6.0
    id: str = ""
    kind: str = field(default="hermite", init=False)

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(v) for v in self.index))
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if len(self.index) != len(self.center):
            raise ValueError("Hermite index and center must have the same dimension")
        if not self.id:
            object.__setattr__(self, "id", "h" + "_".join(map(str, self.index)))

    @property
    def d(self) -> int:
        return len(self.index)

    @property
    def eigenvalue(self) -> float:
        return 2.0 * sum(self.index) + self.d

    @property
    def support_radius(self) -> float:
        return math.sqrt(self.eigenvalue) + self.margin

    def _rel(self, x) -> np.ndarray:
        dx = _points(x, self.d) - np.asarray(self.center)[None, :]
        if self.period:
            dx = dx - self.period * np.floor(dx / self.period + 0.5)
        return dx

    def _tables(self, x):
        dx = self._rel(x)
        tabs = [hermite_table(n + 1, dx[:, i]) for i, n in enumerate(self.index)]
        return dx, tabs

    def value(self, x):
        _, tabs = self._tables(x)
        out = np.ones(tabs[0].shape[1])
        for t, n in zip(tabs, self.index):
            out = out * t[n]
        return out

    def _factor_derivatives(self, dx, tabs):
        vals, d1, d2 = [], [], []
        for i, (t, n) in enumerate(zip(tabs, self.index)):
            v = t[n]
            lower = t[n - 1] if n > 0 else np.zeros_like(v)
            d1.append(math.sqrt(n / 2.0) * lower - math.sqrt((n + 1) / 2.0) * t[n + 1])
            d2.append((dx[:, i] ** 2 - (2 * n + 1)) * v)
            vals.append(v)
        return vals, d1, d2

    def gradient(self, x):
        dx, tabs = self._tables(x)
        vals, d1, _ = self._factor_derivatives(dx, tabs)
        out = np.empty((len(dx), self.d))
        for i in range(self.d):
            prod = d1[i].copy()
            for j in range(self.d):
                if j != i:
                    prod = prod * vals[j]
            out[:, i] = prod
        return out

    def hessian(self, x):
        dx, tabs = self._tables(x)
        vals, d1, d2 = self._factor_derivatives(dx, tabs)
        out = np.empty((len(dx), self.d, self.d))
        for i in range(self.d):
            for j in range(self.d):
                prod = np.ones(len(dx))
                for m in range(self.d):
                    if i == j:
                        prod = prod * (d2[m] if m == i else vals[m])
                    else:
                        prod = prod * (d1[m] if m in (i, j) else vals[m])
                out[:, i, j] = prod
        return out

    def laplacian(self, x):
        dx = self._rel(x)
        return (np.sum(dx ** 2, axis=1) - self.eigenvalue) * self.value(x)

    @property
    def integral(self) -> float:
        ints = hermite_integrals(max(self.index))
        return float(np.prod([ints[n] for n in self.index]))

    @property
    def norm0_sq(self) -> float:
        return 1.0

    @property
    def grad_norm_sq(self) -> float:
        return float(sum(n + 0.5 for n in self.index))

    @cached_property
    def lap_norm_sq(self) -> float:
        return _gauss_hermite_integral(self, lambda f, x: f.laplacian(x) ** 2)

    @cached_property
    def hess_norm_sq(self) -> float:
        return _gauss_hermite_integral(self, lambda f, x: np.sum(f.hessian(x) ** 2, axis=(1, 2)))

    def check_support(self, torus: Torus) -> None:
        c = np.asarray(self.center)
        room = min(float(np.min(c)), float(np.min(torus.L - c)))
        if torus.d != self.d or self.support_radius > room:
            raise SupportError(
                f"Hermite proxy {self.id} needs radius {self.support_radius:.3g} around its center; torus side {torus.L:g}"
            )

    def quadrature_box(self):
        c = np.asarray(self.center)
        return c - self.support_radius, c + self.support_radius


def _gauss_hermite_integral(f: HermiteProxy, fn) -> float:
    """∫_{R^d} fn(f, x) dx for integrands of Gaussian type e^{−|x−c|²}·poly."""
    m = 2 * max(f.index) + 24
    y, w = special.roots_hermite(m)
    grids = np.meshgrid(*([y] * f.d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack(np.meshgrid(*([w] * f.d), indexing="ij"), axis=0).reshape(f.d, -1), axis=0)
    x = pts + np.asarray(f.center)[None, :]
    vals = fn(f, x) * np.exp(np.sum(pts ** 2, axis=1))
    return float(np.sum(wts * vals))


# ---------- inner products ----------
def _fourier_inner(f: FourierMode, g: FourierMode) -> float:
    if not math.isclose(f.period, g.period) or f.d != g.d:
        raise ValueError("Fourier inner products need modes on the same torus")
    vol = f.period ** f.d
    same = f.k == g.k
    opposite = tuple(-v for v in f.k) == g.k
    if not (same or opposite):
        return 0.0
    amp = f.amplitude * g.amplitude
    if f.is_constant:
        return amp * vol if (f.phase == g.phase == "cos") else 0.0
    if f.phase != g.phase:
        return 0.0
    if f.phase == "cos":
        return amp * vol / 2.0
    return amp * vol / 2.0 * (1.0 if same else -1.0)


def _box_quadrature(f: TestFunction, g: TestFunction, integrand) -> float:
    lo_f, hi_f = f.quadrature_box()
    lo_g, hi_g = g.quadrature_box()
    lo, hi = np.minimum(lo_f, lo_g), np.maximum(hi_f, hi_g)
    d = f.d
    panels = {1: 64, 2: 32, 3: 12}.get(d, 8)
    t, w = special.roots_legendre(8)
    axes, weights = [], []
    for a, b in zip(lo, hi):
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        axes.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
    grid = np.stack([g_.ravel() for g_ in np.meshgrid(*axes, indexing="ij")], axis=1)
    wts = np.prod(np.stack([g_.ravel() for g_ in np.meshgrid(*weights, indexing="ij")], axis=0), axis=0)
    return float(np.sum(wts * integrand(grid)))


def l2_inner(f: TestFunction, g: TestFunction, order: str = "value") -> float:
    """⟨f, g⟩₀ (order="value") or ∫(∇f, ∇g) (order="gradient")."""
    if order not in ("value", "gradient"):
        raise ValueError(f"order must be 'value' or 'gradient', got {order!r}")
    if isinstance(f, FourierMode) and isinstance(g, FourierMode):
        if order == "value":
            return _fourier_inner(f, g)
        return float(f.q @ g.q) * _fourier_inner(f.rotated(), g.rotated())
    if f is g or f == g:
        return f.norm0_sq if order == "value" else f.grad_norm_sq
    if order == "value":
        return _box_quadrature(f, g, lambda x: f.value(x) * g.value(x))
    return _box_quadrature(f, g, lambda x: np.sum(f.gradient(x) * g.gradient(x), axis=1))


def gram_matrix(functions: Sequence[TestFunction], order: str = "value") -> np.ndarray:
    n = len(functions)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = l2_inner(functions[i], functions[j], order)
    return out


# ---------- scaled fields ----------
def s_in(gamma: Configuration, eps: float) -> Configuration:
    """Positions scaled by ε onto the torus of side ε·L."""
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if eps == 1.0:
        return gamma.copy()
    torus = Torus(gamma.torus.L * eps, gamma.torus.d)
    return Configuration(torus, gamma.positions * eps)


@dataclass
class ScaledField:
    configuration: Configuration
    eps: float
    rho1: float

    @property
    def d(self) -> int:
        return self.configuration.torus.d

    @cached_property
    def torus(self) -> Torus:
        return Torus(self.configuration.torus.L * self.eps, self.d)

    @cached_property
    def positions(self) -> np.ndarray:
        return self.torus.wrap(self.configuration.positions * self.eps)

    @property
    def mass(self) -> float:
        return self.eps ** (self.d / 2.0)


def pairing(sf: ScaledField, values: np.ndarray, integral: float) -> float:
    """ε^{d/2}(Σ values − ρ⁽¹⁾ε^{−d}·integral) for a function already evaluated at the scaled positions."""
    total = math.fsum(np.asarray(values, dtype=float)) if len(values) else 0.0
    return sf.mass * (total - sf.rho1 * sf.eps ** (-sf.d) * integral)


def fluctuation_field(sf: ScaledField, f: TestFunction) -> float:
    f.check_support(sf.torus)
    if sf.configuration.n == 0:
        return pairing(sf, np.zeros(0), f.integral)
    return pairing(sf, f.value(sf.positions), f.integral)


def field_pairings(sf: ScaledField, family: Sequence[TestFunction]) -> np.ndarray:
    return np.array([fluctuation_field(sf, f) for f in family])


# ---------- Hermite basis and Sobolev norms ----------
class HermiteBasis:
    """e_n(x − c) for multi-indices with 2|n| + d <= 2·max_level + d, ordered by eigenvalue."""

    def __init__(self, d: int, max_level: int = 40, center: Optional[Sequence[float]] = None):
        if d < 1 or max_level < 0:
            raise ValueError(f"invalid HermiteBasis(d={d}, max_level={max_level})")
        self.d = d
        self.max_level = max_level
        self.center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        self.indices = hermite_index_set(d, max_level)
        self.eigenvalues = np.array([2.0 * sum(n) + d for n in self.indices])

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def support_radius(self) -> float:
        return math.sqrt(2.0 * self.max_level + self.d) + 6.0

    def evaluate(self, i: int, x) -> np.ndarray:
        return hermite_eval(self.indices[i], _points(x, self.d) - self.center[None, :])

    @cached_property
    def integrals(self) -> np.ndarray:
        ints = hermite_integrals(self.max_level)
        return np.array([np.prod([ints[n] for n in idx]) for idx in self.indices])

    def raw_sums(self, x: np.ndarray) -> np.ndarray:
        """Σ_p e_i(x_p − c) for every basis index."""
        x = _points(x, self.d) - self.center[None, :]
        tabs = [hermite_table(self.max_level, x[:, k]) for k in range(self.d)]
        if self.d == 1:
            full = tabs[0].sum(axis=1)
            return np.array([full[n[0]] for n in self.indices])
        if self.d == 2:
            full = tabs[0] @ tabs[1].T
            return np.array([full[n] for n in self.indices])
        full = np.einsum("ap,bp,cp->abc", *tabs)
        return np.array([full[n] for n in self.indices])

    def pairings(self, sf: ScaledField) -> np.ndarray:
        """⟨e_i, ω⟩ for all i, centered with ρ⁽¹⁾ε^{−d}∫e_i."""
        c = self.center
        room = min(float(np.min(c)), float(np.min(sf.torus.L - c)))
        if self.support_radius > room:
            raise SupportError(
                f"Hermite basis up to level {self.max_level} needs radius {self.support_radius:.3g}; "
                f"torus side {sf.torus.L:g} with center {c.tolist()}"
            )
        sums = self.raw_sums(sf.positions) if sf.configuration.n else np.zeros(len(self))
        return sf.mass * (sums - sf.rho1 * sf.eps ** (-sf.d) * self.integrals)


@dataclass(frozen=True)
class SobolevNorm:
    value: float
    truncation: int
    m: float


def sobolev_norm_neg(values, m: float, basis: HermiteBasis) -> SobolevNorm:
    """‖ω‖²_{−m,M} = Σ_{i<M} a_i^{−m} ⟨e_i, ω⟩² with M = len(values)."""
    values = np.asarray(values, dtype=float)
    if m < basis.d + 1:
        raise ValueError(f"order m must be >= d + 1 = {basis.d + 1}, got {m}")
    if len(values) > len(basis):
        raise ValueError(f"{len(values)} pairings exceed the basis truncation {len(basis)}")
    a = basis.eigenvalues[: len(values)]
    return SobolevNorm(float(np.sum(a ** (-m) * values ** 2)), len(values), m)


# ---------- cylinder functions ----------
@dataclass
class CylinderFunction:
    """F(ω) = g(⟨f_1, ω⟩, ..., ⟨f_N, ω⟩) with ∇g supplied."""

    functions: List[TestFunction]
    g: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    label: str = "F"

    @classmethod
    def linear(cls, f: TestFunction) -> "CylinderFunction":
        return cls([f], lambda v: float(v[0]), lambda v: np.ones(1), f"lin({f.id})")

    @classmethod
    def sine(cls, f: TestFunction) -> "CylinderFunction":
        return cls([f], lambda v: float(np.sin(v[0])), lambda v: np.array([np.cos(v[0])]), f"sin({f.id})")

    @classmethod
    def constant(cls, c: float, f: TestFunction) -> "CylinderFunction":
        return cls([f], lambda v: float(c), lambda v: np.zeros(1), f"const({c:g})")

    def gradient_matrix(self, pairings: np.ndarray) -> np.ndarray:
        """∇g at each row of pairings (shape (S, N)) -> (S, N)."""
        pairings = np.atleast_2d(pairings)
        return np.array([np.asarray(self.grad(p), dtype=float) for p in pairings])


# ---------- field series ----------
@dataclass
class FieldSeries:
    times: np.ndarray
    values: np.ndarray
    ids: List[str]
    meta: Dict[str, object] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.ids.index(name)]

    def to_file(self, path) -> None:
        store.write_series(path, self.meta, self.ids, self.times, self.values)

    @classmethod
    def from_file(cls, path) -> "FieldSeries":
        meta, cols, times, values = store.read_series(path)
        return cls(times, values, cols, dict(meta))
