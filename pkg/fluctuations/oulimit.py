"""
fluctuations/oulimit.py

Limiting objects for the density-fluctuation field:
- white-noise variance χ‖f‖₀²,
- stationary Ornstein–Uhlenbeck autocovariance on Fourier modes,
- an exact per-mode OU simulator (same FieldSeries format as the Langevin runs),
- the limit Dirichlet form on cylinder functions, estimated over white-noise samples.

Spectral picture: with drift (ρ⁽¹⁾/χ)Δ and noise √(2ρ⁽¹⁾)·dW where W has covariance −Δ,
the normalized amplitude of the mode e^{iq·x}/√V receives noise of variance 2ρ⁽¹⁾|q|²dt and
relaxes at θ = (ρ⁽¹⁾/χ)|q|². Its stationary variance is 2ρ⁽¹⁾|q|²/(2θ) = χ for every q ≠ 0,
and the exact transition is a ← a·e^{−θdt} + √(χ(1 − e^{−2θdt}))·ξ.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from fluctuations.scaling import CylinderFunction, FieldSeries, FourierMode, TestFunction, gram_matrix, l2_inner
from fluctuations.stats import Estimate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OUParams:
    rho1: float
    chi: float

    def __post_init__(self):
        if not (self.rho1 > 0 and self.chi > 0):
            raise ValueError(f"OU parameters must be positive, got rho1={self.rho1}, chi={self.chi}")

    @property
    def diffusion(self) -> float:
        return self.rho1 / self.chi

    @property
    def noise_strength(self) -> float:
        return math.sqrt(2.0 * self.rho1)

    def rate(self, f: FourierMode) -> float:
        return self.diffusion * f.q_sq

    @classmethod
    def poisson(cls, z: float = 1.0) -> "OUParams":
        return cls(z, z)

    @classmethod
    def from_coefficients(cls, coeffs) -> "OUParams":
        return cls(float(coeffs.rho1), float(coeffs.chi))


def _canonical(k: Sequence[int]) -> Tuple[Tuple[int, ...], int]:
    """Representative of ±k whose first nonzero entry is positive, and the sign used."""
    k = tuple(int(v) for v in k)
    for v in k:
        if v != 0:
            return (k, 1) if v > 0 else (tuple(-u for u in k), -1)
    return k, 1


@dataclass
class OUFieldState:
    """
    Complex amplitudes a_k = ⟨e^{−iq·x}, X⟩/√V for a half-space of retained k.

    The amplitude of −k is conj(a_k), so the field is real; a_0 stays real.
    """

    ks: List[Tuple[int, ...]]
    amplitudes: np.ndarray
    period: float

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        for pos, k in enumerate(self.ks):
            if _canonical(k)[1] != 1:
                raise ValueError(f"retained wavevector {k} is not in the canonical half-space")
            if not any(k):
                self.amplitudes[pos] = self.amplitudes[pos].real

    @property
    def d(self) -> int:
        return len(self.ks[0]) if self.ks else 0

    def amplitude(self, k: Sequence[int]) -> complex:
        key, sign = _canonical(k)
        a = self.amplitudes[self.ks.index(key)]
        return a if sign == 1 else np.conj(a)

    def pairing(self, f: FourierMode) -> float:
        """⟨f, X⟩ for a cos/sin Fourier mode on the same torus."""
        a = self.amplitude(f.k)
        root_v = math.sqrt(self.period ** self.d)
        if f.phase == "cos":
            return f.amplitude * root_v * float(np.real(a))
        return -f.amplitude * root_v * float(np.imag(a))


def _require_modes(f) -> List[FourierMode]:
    fs = [f] if isinstance(f, TestFunction) else list(f)
    for g in fs:
        if not isinstance(g, FourierMode):
            raise ValueError(f"OU analytics need Fourier modes, got {type(g).__name__} ({getattr(g, 'id', '?')})")
    return fs


def white_noise_variance(f: TestFunction, chi: float) -> float:
    return chi * f.norm0_sq


def ou_autocov(f: Union[FourierMode, Sequence[FourierMode]], t, p: OUParams):
    """Stationary Cov(⟨f, X(t)⟩, ⟨f, X(0)⟩) for a mode or a finite sum of modes."""
    fs = _require_modes(f)
    ts = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(ts)
    for i, fi in enumerate(fs):
        for fj in fs:
            w = l2_inner(fi, fj)
            if w != 0.0:
                out = out + p.chi * w * np.exp(-p.rate(fi) * ts)
    return float(out) if out.ndim == 0 else out


def stationary_state(ks: Sequence[Sequence[int]], period: float, p: OUParams,
                     rng: np.random.Generator) -> OUFieldState:
    keys = sorted({_canonical(k)[0] for k in ks})
    amps = np.empty(len(keys), dtype=complex)
    for pos, k in enumerate(keys):
        if any(k):
            amps[pos] = math.sqrt(p.chi / 2.0) * complex(rng.standard_normal(), rng.standard_normal())
        else:
            amps[pos] = math.sqrt(p.chi) * rng.standard_normal()
    return OUFieldState(keys, amps, period)


def simulate_ou(p: OUParams, modes: Sequence[FourierMode], horizon: float, dt: float,
                seed: int = 0, record_stride: int = 1) -> FieldSeries:
    """Exact OU transitions per retained mode from a stationary start; records every `record_stride` steps."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    modes = _require_modes(modes)
    if not modes:
        raise ValueError("simulate_ou needs at least one mode")
    period = modes[0].period
    if any(not math.isclose(m.period, period) for m in modes):
        raise ValueError("all modes must live on the same torus")
    rng = np.random.default_rng(seed)
    state = stationary_state([m.k for m in modes], period, p, rng)
    q_sq = np.array([(2.0 * math.pi / period) ** 2 * sum(v * v for v in k) for k in state.ks])
    decay = np.exp(-p.diffusion * q_sq * dt)
    kick = np.sqrt(p.chi * (1.0 - decay ** 2))
    zero_mode = np.array([not any(k) for k in state.ks])

    n_steps = int(round(horizon / dt))
    stride = max(1, int(record_stride))
    times, rows = [], []
    for step in range(n_steps + 1):
        if step % stride == 0:
            times.append(step * dt)
            rows.append([state.pairing(m) for m in modes])
        if step == n_steps:
            break
        noise = (rng.standard_normal(len(q_sq)) + 1j * rng.standard_normal(len(q_sq))) / math.sqrt(2.0)
        noise[zero_mode] = 0.0
        state.amplitudes = state.amplitudes * decay + kick * noise
    meta: Dict[str, object] = {
        "source": "ou", "rho1": p.rho1, "chi": p.chi, "dt": dt, "seed": int(seed),
        "L": period, "ids": "|".join(m.id for m in modes),
    }
    return FieldSeries(np.array(times), np.array(rows, dtype=float), [m.id for m in modes], meta)


def free_increment_moments(f: FourierMode, tau, z: float, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Second and fourth moments of ⟨f, X_ε(t+τ)⟩ − ⟨f, X_ε(t)⟩ for the stationary ideal gas.

    Particles are independent, so the increment is compound Poisson with cumulants
    κ_n = z·V·E[D^n], V = (L₀/ε)^d, D the one-particle increment. With s = |q|²τ:
    E[D²] = ε^d·A²·(1 − e^{−s}), E[D⁴] = ε^{2d}·A⁴·(3/2)(3/2 − 2e^{−s} + e^{−4s}/2),
    and the fourth moment is κ₄ + 3κ₂².
    """
    if not isinstance(f, FourierMode) or f.is_constant:
        raise ValueError("free_increment_moments needs a non-constant Fourier mode")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    s = f.q_sq * np.abs(np.asarray(tau, dtype=float))
    d = f.d
    n_mean = z * (f.period / eps) ** d
    a2 = f.amplitude ** 2
    d2 = eps ** d * a2 * (1.0 - np.exp(-s))
    d4 = eps ** (2 * d) * a2 ** 2 * 1.5 * (1.5 - 2.0 * np.exp(-s) + 0.5 * np.exp(-4.0 * s))
    k2 = n_mean * d2
    return k2, n_mean * d4 + 3.0 * k2 ** 2


def _white_noise_factor(cov: np.ndarray) -> np.ndarray:
    jitter = 1e-12 * max(1.0, float(np.trace(cov)))
    try:
        return linalg.cholesky(cov + jitter * np.eye(len(cov)), lower=True)
    except linalg.LinAlgError:
        w, v = linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))[None, :]


def dirichlet_limit_form(F: CylinderFunction, G: CylinderFunction, p: OUParams,
                         n_samples: int = 20000, rng: Optional[np.random.Generator] = None) -> Estimate:
    """
    E(F, G) = ρ⁽¹⁾·E_ν[Σ ∂_i g_F ∂_j g_G ∫(∇f_i, ∇f_j)] with pairings drawn from the white-noise
    measure (Gaussian, covariance χ⟨f_i, f_j⟩₀). Linear F, G give zero spread.
    """
    rng = np.random.default_rng(rng)
    funcs = list(F.functions) + list(G.functions)
    nf = len(F.functions)
    cov = p.chi * gram_matrix(funcs, "value")
    grads = gram_matrix(funcs, "gradient")[:nf, nf:]
    factor = _white_noise_factor(cov)
    samples = rng.standard_normal((n_samples, len(funcs))) @ factor.T
    gf = F.gradient_matrix(samples[:, :nf])
    gg = G.gradient_matrix(samples[:, nf:])
    vals = p.rho1 * np.einsum("si,ij,sj->s", gf, grads, gg)
    stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    return Estimate(float(vals.mean()), stderr)
