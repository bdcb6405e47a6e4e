# fluctuations/stats.py
"""Shared estimators: autocorrelation time, block bootstrap, regression slopes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def within(self, target: float, n_sigma: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.value - target) <= n_sigma * self.stderr + floor


def integrated_autocorr_time(x, window_factor: float = 5.0) -> float:
    """
    τ_int = 1 + 2 Σ ρ_k with Sokal's automatic window (smallest M >= c·τ(M)).

    Returns 1.0 for constant or very short series.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return 1.0
    y = x - x.mean()
    var = float(np.dot(y, y)) / n
    if var <= 0.0:
        return 1.0
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, n=size)
    acf = np.fft.irfft(f * np.conjugate(f), n=size)[:n] / (n * var)
    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n) >= window_factor * taus
    m = int(np.argmax(window)) if np.any(window) else n - 1
    return max(1.0, float(taus[m]))


def block_length_for(series, factor: float = 5.0) -> int:
    return max(1, int(math.ceil(factor * integrated_autocorr_time(series))))


def block_bootstrap(data, statistic: Callable[[np.ndarray], np.ndarray], block_length: int,
                    n_boot: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Non-overlapping block bootstrap along axis 0.

    Returns (point estimate, standard error) of `statistic`, which maps an array of
    samples (first axis = sample) to a scalar or an array.
    """
    data = np.asarray(data)
    n = len(data)
    point = np.asarray(statistic(data), dtype=float)
    block_length = max(1, min(int(block_length), n // 2 if n >= 2 else 1))
    n_blocks = n // block_length
    if n_blocks < 2 or n_boot < 2:
        return point, np.full_like(point, np.nan)
    blocks = data[: n_blocks * block_length].reshape((n_blocks, block_length) + data.shape[1:])
    reps = []
    for _ in range(n_boot):
        pick = rng.integers(0, n_blocks, size=n_blocks)
        sample = blocks[pick].reshape((n_blocks * block_length,) + data.shape[1:])
        reps.append(np.asarray(statistic(sample), dtype=float))
    return point, np.std(np.stack(reps), axis=0, ddof=1)


def mean_estimate(x, tau: Optional[float] = None) -> Estimate:
    """Sample mean with an autocorrelation-corrected standard error."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n == 0:
        return Estimate(math.nan, math.nan)
    if n == 1:
        return Estimate(float(x[0]), math.nan)
    t = integrated_autocorr_time(x) if tau is None else tau
    return Estimate(float(x.mean()), float(math.sqrt(x.var(ddof=1) * t / n)))


def variance_estimate(x) -> Estimate:
    """Sample variance with the large-sample standard error sqrt((m4 − s⁴)/n)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        return Estimate(math.nan, math.nan)
    c = x - x.mean()
    s2 = float(c.var(ddof=1))
    m4 = float(np.mean(c ** 4))
    tau = integrated_autocorr_time(c ** 2)
    return Estimate(s2, math.sqrt(max(m4 - s2 ** 2, 0.0) * tau / n))


def linear_fit(x, y) -> Tuple[float, float, float]:
    """Least-squares y = a + b·x; returns (b, stderr(b), a). With two points stderr(b) is nan."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("linear_fit needs at least two points")
    if np.ptp(x) == 0.0:
        raise ValueError("linear_fit needs distinct x values")
    fit = stats.linregress(x, y)
    se = float(fit.stderr) if len(x) > 2 else math.nan
    return float(fit.slope), se, float(fit.intercept)


def loglog_slope(x, y) -> Tuple[float, float]:
    """Slope and its standard error of log y against log x (positive data only)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    b, se, _ = linear_fit(np.log(x[keep]), np.log(y[keep]))
    return b, se
