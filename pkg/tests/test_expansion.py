from __future__ import annotations

import numpy as np
import pytest

from fluctuations.configuration import Torus
from fluctuations.expansion import (
    ExpansionCoefficients,
    Rho2Approximant,
    approximant,
    cluster_series,
    coefficient_table,
    coefficients,
    coercivity_sides,
    curvature_at_zero,
    curvature_finite_difference,
    leading_remainder,
    poisson_coercivity,
    radial_quadrature,
)
from fluctuations.gibbs import GibbsParams, sample_ensemble
from fluctuations.oracle import FiniteVolumeSpec, oracle_system
from fluctuations.potentials import PairPotential, bump_integral, moments
from fluctuations.scaling import CompactBump, FourierMode


def test_radial_quadrature_unit_ball():
    # |B_1| in d = 3
    assert radial_quadrature(lambda r: np.ones_like(r), 3, [0.0, 1.0]) == pytest.approx(4.0 * np.pi / 3.0)


def test_cluster_series_ideal_gas():
    cs = cluster_series(PairPotential.zero(2), 0.3, z=0.7)
    assert cs.rho1 == pytest.approx(0.7)
    assert cs.chi == pytest.approx(0.7)


def test_cluster_convolution_at_origin_is_l2_norm():
    phi = PairPotential.bump(1, height=1.0, width=1.0)
    beta = 0.4
    cs = cluster_series(phi, beta)
    f_sq = radial_quadrature(lambda r: np.expm1(-beta * phi.profile(r)[0]) ** 2, 1, [0.0, 1.0])
    assert float(cs.conv_at(0.0)) == pytest.approx(f_sq, rel=1e-3)
    assert cs.int_f < 0


def test_cluster_chi_matches_connected_integral():
    phi = PairPotential.bump(1)
    approx = approximant(phi, 0.3, "cluster", z=1.0)
    cs = cluster_series(phi, 0.3, 1.0)
    c = coefficients(phi, 0.3, approx)
    assert c.rho1 == pytest.approx(cs.rho1)
    assert c.chi == pytest.approx(cs.chi, rel=1e-3)
    assert c.source == "low_beta_analytic" and c.order == "cluster"


def test_boltzmann_coefficients_at_small_beta():
    phi = PairPotential.bump(2)
    beta = 1e-3
    c = coefficients(phi, beta, Rho2Approximant.boltzmann(phi, beta))
    # χ ≈ 1 − β∫φ and D ≈ 1 + β·½∫x₁²∂₁₁φ = 1 + β∫φ
    assert c.chi == pytest.approx(1.0 - beta * bump_integral(phi), rel=1e-5)
    assert c.d_phi == pytest.approx(1.0 + beta * bump_integral(phi), rel=1e-5)
    assert c.bulk_diffusion == pytest.approx(c.rho1 / c.chi)


def test_zero_potential_coefficients():
    phi = PairPotential.zero(1)
    c = coefficients(phi, 0.5, approximant(phi, 0.5, "boltzmann", z=2.0))
    assert (c.rho1, c.chi, c.d_phi) == pytest.approx((2.0, 2.0, 2.0))
    assert c.r_phi == pytest.approx(0.0)


def test_curvature_closed_form():
    phi = PairPotential.bump(2)
    m = moments(phi, 0.0)
    c = curvature_at_zero(phi)
    assert c.d2_compress == pytest.approx(-m.int_phi ** 2)
    assert c.d2_D - c.d2_compress == pytest.approx(m.int_x1d1_sq)
    assert c.d2_R == pytest.approx(2.0 * m.int_x1d1_sq)
    assert curvature_at_zero(PairPotential.zero(3)).d2_R == 0.0


def test_remainder_conventions():
    phi = PairPotential.bump(1)
    assert leading_remainder(phi, 0.1, "leading") == pytest.approx(2.0 * leading_remainder(phi, 0.1, "taylor"))
    with pytest.raises(ValueError):
        leading_remainder(phi, 0.1, "other")


def test_cluster_curvature_matches_closed_form():
    phi = PairPotential.bump(1)
    est = curvature_finite_difference(phi, lambda b: approximant(phi, b, "cluster", 1.0), [-0.01, 0.0, 0.01])
    exact = curvature_at_zero(phi)
    assert est.d2_D == pytest.approx(exact.d2_D, rel=0.05)
    assert est.d2_compress == pytest.approx(exact.d2_compress, rel=0.05)
    # the finite difference is the Taylor second derivative, half of the leading coefficient
    assert est.d2_R == pytest.approx(exact.d2_R / 2.0, rel=0.05)


def test_curvature_needs_equal_spacing():
    phi = PairPotential.bump(1)
    with pytest.raises(ValueError):
        curvature_finite_difference(phi, lambda b: approximant(phi, b), [0.0, 0.1, 0.3])


def test_oracle_approximant_tags():
    spec = FiniteVolumeSpec(length=4.0, d=1, n_max=3, quad_points=12)
    system = oracle_system(spec, PairPotential.bump(1), 0.2, 0.5)
    approx = Rho2Approximant.from_oracle(system, n_points=16)
    assert approx.source == "oracle_backed"
    assert np.all(np.isfinite(approx(np.linspace(0.0, 2.0, 5))))


def test_unknown_order_rejected():
    with pytest.raises(ValueError):
        approximant(PairPotential.bump(1), 0.1, "mc_interpolated")


def test_coefficient_table_rows():
    rows = coefficient_table(PairPotential.bump(1), "bump", [0.0, 0.1])
    assert len(rows) == 4
    assert {r["order"] for r in rows} == {"boltzmann", "cluster"}
    assert all(r["potential"] == "bump" for r in rows)


def test_poisson_coercivity_sides():
    L, z = 10.0, 1.0
    p = GibbsParams(0.0, z, Torus(L, 1), PairPotential.zero(1))
    configs = sample_ensemble(p, 4000, 1, 0, 17)
    for f in (FourierMode((1,), L), CompactBump((5.0,), 2.0, period=L)):
        sides = coercivity_sides(f, configs, PairPotential.zero(1), 0.0)
        lhs, rhs = poisson_coercivity(f, z)
        assert sides.lhs.within(lhs, 4.0)
        assert sides.rhs.within(rhs, 4.0)
        assert sides.agrees(4.0)


def test_expansion_coefficients_row():
    row = ExpansionCoefficients(1.0, 1.0, 1.0, 1.0, 0.0, "low_beta_analytic").as_row()
    assert set(row) == {"beta", "source", "order", "rho1", "chi", "bulk_diffusion", "d_phi", "r_phi"}
