from __future__ import annotations

import math

import numpy as np
import pytest

from fluctuations.errors import SingularOriginError
from fluctuations.potentials import (
    PairPotential,
    bump_integral,
    derivatives,
    evaluate,
    moments,
    regime_check,
    sphere_area,
)


def test_sphere_area_low_dimensions():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_bump_profile_matches_formula():
    phi = PairPotential.bump(2, height=2.0, width=1.5)
    r = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    v, dv_r, d2v = phi.profile(r)
    expected = 2.0 * np.clip(1 - r ** 2 / 1.5 ** 2, 0, None) ** 3
    assert np.allclose(v, expected)
    assert v[-1] == 0.0 and dv_r[-1] == 0.0 and d2v[-1] == 0.0
    # V'(r)/r from a central difference
    h = 1e-6
    num = (phi.profile(np.array([0.5 + h]))[0] - phi.profile(np.array([0.5 - h]))[0]) / (2 * h)
    assert dv_r[1] * 0.5 == pytest.approx(num[0], rel=1e-6)


def test_gradient_and_hessian_are_consistent():
    phi = PairPotential.bump(3)
    x = np.array([0.2, -0.3, 0.1])
    grad, hess = derivatives(phi, x)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (evaluate(phi, x + e) - evaluate(phi, x - e)) / (2 * h)
        assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)
        gp, _ = derivatives(phi, x + e)
        gm, _ = derivatives(phi, x - e)
        assert np.allclose(hess[:, k], (gp - gm) / (2 * h), atol=1e-6)
    assert np.allclose(hess, hess.T)


def test_lj_is_singular_and_floored():
    phi = PairPotential.lennard_jones(2)
    with pytest.raises(SingularOriginError):
        evaluate(phi, [0.0, 0.0])
    assert math.isinf(evaluate(phi, [0.3, 0.0]))
    assert evaluate(phi, [2 ** (1 / 6), 0.0]) == pytest.approx(-1.0, rel=1e-9)
    assert evaluate(phi, [2.6, 0.0]) == 0.0


def test_lj_tail_is_c2_at_switch():
    phi = PairPotential.lennard_jones(1, r_cut=2.5)
    rs = phi.r_switch
    below = phi.profile(np.array([rs - 1e-9]))
    above = phi.profile(np.array([rs + 1e-9]))
    for lo, hi in zip(below, above):
        assert lo[0] == pytest.approx(hi[0], rel=1e-5, abs=1e-8)
    # vanishes with two derivatives at the cut
    v, dv_r, d2v = phi.profile(np.array([2.5 - 1e-9]))
    assert abs(v[0]) < 1e-12 and abs(dv_r[0]) < 1e-8 and abs(d2v[0]) < 1e-6


def test_lj_rejects_bad_radii():
    with pytest.raises(ValueError):
        PairPotential.lennard_jones(2, r_cut=1.0, r_switch=1.5)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_bump_integral_matches_quadrature(d):
    phi = PairPotential.bump(d, height=1.3, width=0.8)
    m = moments(phi, 0.1)
    assert m.int_phi == pytest.approx(bump_integral(phi), rel=1e-8)


def test_moment_tensor_contracts_to_k():
    # T_1111 = ∫ (x¹)² ∂₁∂₁φ and K = ∫ (x¹∂₁φ)² are different functionals; check symmetry and trace
    phi = PairPotential.bump(2)
    m = moments(phi, 0.1)
    t = m.int_xkxl_didj_phi
    assert np.allclose(t, np.transpose(t, (1, 0, 2, 3)))
    assert np.allclose(t, np.transpose(t, (2, 3, 0, 1)))
    # Σ_k ∫ x^k x^k Δφ = ∫ r² Δφ = 2d ∫ φ by two integrations by parts
    trace = sum(t[i, i, k, k] for i in range(2) for k in range(2))
    assert trace == pytest.approx(2 * 2 * m.int_phi, rel=1e-6)
    assert m.int_x1d1_sq > 0


def test_zero_potential_moments_vanish():
    m = moments(PairPotential.zero(3), 1.0)
    assert m.int_phi == 0.0 and m.int_x1d1_sq == 0.0 and m.mayer_C == 0.0
    assert not np.any(m.int_xkxl_didj_phi)


def test_regime_check_small_beta_inside():
    phi = PairPotential.bump(2)
    small = regime_check(phi, 0.05, 1.0)
    assert small.in_LAHT and small.C > 0
    large = regime_check(phi, 5.0, 1.0)
    assert large.C > small.C
    assert regime_check(phi, 0.0, 1.0).C == 0.0


def test_regime_check_rejects_negative_beta():
    with pytest.raises(ValueError):
        regime_check(PairPotential.bump(1), -1.0, 1.0)
