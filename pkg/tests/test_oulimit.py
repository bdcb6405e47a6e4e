from __future__ import annotations

import math

import numpy as np
import pytest

from fluctuations.oulimit import (
    OUFieldState,
    OUParams,
    dirichlet_limit_form,
    free_increment_moments,
    ou_autocov,
    simulate_ou,
    stationary_state,
    white_noise_variance,
)
from fluctuations.scaling import CompactBump, CylinderFunction, FourierMode


def test_params_validation_and_rates():
    with pytest.raises(ValueError):
        OUParams(0.0, 1.0)
    p = OUParams(0.8, 1.6)
    f = FourierMode((2,), 5.0)
    assert p.diffusion == pytest.approx(0.5)
    assert p.rate(f) == pytest.approx(0.5 * f.q_sq)
    assert p.noise_strength == pytest.approx(math.sqrt(1.6))


def test_autocov_at_zero_is_white_noise_variance():
    p = OUParams(1.0, 1.3)
    f = FourierMode((1, 0), 4.0)
    assert ou_autocov(f, 0.0, p) == pytest.approx(white_noise_variance(f, p.chi))
    t = np.array([0.0, 0.5, 1.0])
    cov = ou_autocov(f, t, p)
    assert np.allclose(cov, p.chi * f.norm0_sq * np.exp(-p.rate(f) * t))
    assert ou_autocov(f, -0.5, p) == pytest.approx(cov[1])


def test_autocov_of_a_sum_adds_diagonal_terms():
    p = OUParams.poisson(1.0)
    c = FourierMode((1,), 4.0)
    s = FourierMode((2,), 4.0, "sin")
    both = ou_autocov([c, s], 0.3, p)
    assert both == pytest.approx(ou_autocov(c, 0.3, p) + ou_autocov(s, 0.3, p))


def test_autocov_needs_fourier_modes():
    with pytest.raises(ValueError):
        ou_autocov(CompactBump((2.0,), 1.0), 0.1, OUParams.poisson())


def test_field_state_pairing_conjugates():
    state = OUFieldState([(1,)], np.array([1.0 + 2.0j]), 4.0)
    root_v = 2.0
    assert state.amplitude((-1,)) == pytest.approx(1.0 - 2.0j)
    assert state.pairing(FourierMode((1,), 4.0)) == pytest.approx(root_v * 1.0)
    assert state.pairing(FourierMode((1,), 4.0, "sin")) == pytest.approx(-root_v * 2.0)
    with pytest.raises(ValueError):
        OUFieldState([(-1,)], np.array([0.0j]), 4.0)


def test_stationary_state_variance():
    p = OUParams(1.0, 2.0)
    f = FourierMode((1, 1), 3.0)
    rng = np.random.default_rng(0)
    vals = np.array([stationary_state([f.k], 3.0, p, rng).pairing(f) for _ in range(20000)])
    assert vals.var() == pytest.approx(p.chi * f.norm0_sq, rel=0.05)


def test_simulated_ou_matches_autocovariance():
    p = OUParams(0.7, 1.4)
    f = FourierMode((1,), 6.0)
    series = simulate_ou(p, [f, f.rotated()], horizon=8000.0, dt=0.05, seed=3)
    x = series.column(f.id)
    assert x.var() == pytest.approx(p.chi * f.norm0_sq, rel=0.1)
    lag = 10
    cov = float(np.mean(x[lag:] * x[:-lag]))
    assert cov == pytest.approx(ou_autocov(f, lag * 0.05, p), rel=0.15)
    assert series.meta["source"] == "ou"


def test_simulate_ou_validates_inputs():
    p = OUParams.poisson()
    with pytest.raises(ValueError):
        simulate_ou(p, [], 1.0, 0.1)
    with pytest.raises(ValueError):
        simulate_ou(p, [FourierMode((1,), 2.0), FourierMode((1,), 3.0)], 1.0, 0.1)


def test_linear_dirichlet_form_is_exact():
    p = OUParams(0.6, 1.2)
    f = FourierMode((1, 2), 5.0)
    F = CylinderFunction.linear(f)
    est = dirichlet_limit_form(F, F, p, n_samples=100, rng=1)
    assert est.value == pytest.approx(p.rho1 * f.grad_norm_sq)
    assert est.stderr == pytest.approx(0.0, abs=1e-12)


def test_sine_dirichlet_form_gaussian_average():
    p = OUParams(1.0, 0.5)
    f = FourierMode((1,), 4.0)
    F = CylinderFunction.sine(f)
    est = dirichlet_limit_form(F, F, p, n_samples=40000, rng=2)
    # E[cos²(X)] with X ~ N(0, σ²) is (1 + e^{−2σ²})/2
    s2 = p.chi * f.norm0_sq
    expected = p.rho1 * f.grad_norm_sq * 0.5 * (1.0 + math.exp(-2.0 * s2))
    assert est.within(expected, 4.0)


def test_free_increment_moments_limits():
    f = FourierMode((1,), 10.0)
    k2, m4 = free_increment_moments(f, np.array([0.0, 1e6]), z=1.0, eps=0.5)
    assert k2[0] == 0.0 and m4[0] == pytest.approx(0.0, abs=1e-12)
    # decorrelated: variance twice the white-noise value
    assert k2[1] == pytest.approx(2.0 * f.norm0_sq)
    with pytest.raises(ValueError):
        free_increment_moments(FourierMode((0,), 10.0), 0.1, 1.0, 0.5)
    with pytest.raises(ValueError):
        free_increment_moments(f, 0.1, 1.0, 0.0)


def test_free_increment_fourth_moment_by_sampling():
    L0, eps, z, tau = 10.0, 0.5, 1.0, 0.5
    f = FourierMode((1,), L0)
    rng = np.random.default_rng(8)
    inc = np.empty(20000)
    for s in range(len(inc)):
        n = rng.poisson(z * L0 / eps)
        x = rng.random(n) * L0
        y = x + math.sqrt(2.0 * tau) * rng.standard_normal(n)
        inc[s] = math.sqrt(eps) * float(np.sum(f.value(y[:, None]) - f.value(x[:, None])))
    k2, m4 = free_increment_moments(f, tau, z, eps)
    assert np.mean(inc ** 2) == pytest.approx(float(k2), rel=0.05)
    assert np.mean(inc ** 4) == pytest.approx(float(m4), rel=0.1)
