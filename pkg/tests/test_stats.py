from __future__ import annotations

import math

import numpy as np
import pytest

from fluctuations.stats import (
    Estimate,
    block_bootstrap,
    integrated_autocorr_time,
    linear_fit,
    loglog_slope,
    mean_estimate,
    variance_estimate,
)


def test_estimate_within_uses_floor():
    e = Estimate(1.1, 0.01)
    assert not e.within(1.0, 3.0)
    assert e.within(1.0, 3.0, floor=0.1)


def test_autocorr_time_white_noise_near_one(rng):
    assert integrated_autocorr_time(rng.standard_normal(20000)) == pytest.approx(1.0, abs=0.2)
    assert integrated_autocorr_time(np.ones(100)) == 1.0


def test_autocorr_time_ar1(rng):
    a = 0.8
    x = np.zeros(50000)
    noise = rng.standard_normal(len(x))
    for t in range(1, len(x)):
        x[t] = a * x[t - 1] + noise[t]
    # τ_int = (1 + a) / (1 - a)
    assert integrated_autocorr_time(x) == pytest.approx(9.0, rel=0.2)


def test_block_bootstrap_mean_error(rng):
    x = rng.standard_normal(4000)
    point, err = block_bootstrap(x, np.mean, 10, 300, rng)
    assert float(point) == pytest.approx(x.mean())
    assert float(err) == pytest.approx(1 / math.sqrt(4000), rel=0.25)


def test_block_bootstrap_too_short_gives_nan(rng):
    _, err = block_bootstrap(np.arange(3.0), np.mean, 5, 100, rng)
    assert math.isnan(float(err))


def test_mean_and_variance_estimates(rng):
    x = rng.normal(2.0, 3.0, size=20000)
    m = mean_estimate(x)
    v = variance_estimate(x)
    assert m.within(2.0, 4.0)
    assert v.within(9.0, 4.0)
    assert math.isnan(mean_estimate([1.0]).stderr)


def test_linear_fit_exact_line():
    b, se, a = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert (b, a) == pytest.approx((2.0, 1.0))
    assert se == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        linear_fit([1, 1], [0, 1])


def test_linear_fit_stderr_matches_residual_scatter():
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    y = np.array([0.1, 0.9, 2.2, 2.8, 4.1])
    b, se, a = linear_fit(x, y)
    resid = y - (a + b * x)
    expected = math.sqrt(np.sum(resid ** 2) / 3.0 / np.sum((x - x.mean()) ** 2))
    assert b == pytest.approx(np.polyfit(x, y, 1)[0])
    assert se == pytest.approx(expected)


def test_two_point_fit_has_undetermined_stderr():
    b, se, a = linear_fit([0, 1], [0, 2])
    assert (b, a) == pytest.approx((2.0, 0.0))
    assert math.isnan(se)
    slope, se = loglog_slope([1.0, 0.5, 0.25], [1.0, 0.25, -1.0])
    assert slope == pytest.approx(2.0)
    assert math.isnan(se)


def test_loglog_slope_power_law():
    x = np.array([1.0, 0.5, 0.25, 0.125])
    slope, _ = loglog_slope(x, 3.0 * x ** 1.5)
    assert slope == pytest.approx(1.5)
