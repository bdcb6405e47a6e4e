from __future__ import annotations

import math

import numpy as np
import pytest

from fluctuations.configuration import Configuration, Torus
from fluctuations.errors import SupportError
from fluctuations.gibbs import GibbsParams, sample_ensemble
from fluctuations.potentials import PairPotential
from fluctuations.scaling import (
    CompactBump,
    CylinderFunction,
    FieldSeries,
    FourierMode,
    HermiteBasis,
    HermiteProxy,
    ScaledField,
    field_pairings,
    fluctuation_field,
    gram_matrix,
    hermite_eval,
    hermite_index_set,
    hermite_integrals,
    hermite_table,
    l2_inner,
    s_in,
    sobolev_norm_neg,
)


def test_hermite_functions_are_orthonormal():
    x = np.linspace(-14.0, 14.0, 8001)
    tab = hermite_table(12, x)
    gram = np.trapz(tab[:, None, :] * tab[None, :, :], x, axis=2)
    assert np.allclose(gram, np.eye(13), atol=1e-8)


def test_hermite_table_underflows_cleanly():
    tab = hermite_table(60, np.array([80.0, -80.0]))
    assert np.all(np.isfinite(tab))
    assert np.all(np.abs(tab) < 1e-100)


def test_hermite_integrals_closed_form():
    ints = hermite_integrals(6)
    assert ints[0] == pytest.approx(math.sqrt(2.0) * math.pi ** 0.25)
    assert np.allclose(ints[1::2], 0.0, atol=1e-12)
    x = np.linspace(-14.0, 14.0, 8001)
    assert ints[4] == pytest.approx(np.trapz(hermite_eval(4, x), x), rel=1e-6)


def test_hermite_index_order():
    idx = hermite_index_set(2, 2)
    assert idx[0] == (0, 0)
    assert [sum(n) for n in idx] == sorted(sum(n) for n in idx)
    assert len(idx) == 6


def test_fourier_inner_products():
    c = FourierMode((1, 0), 4.0)
    s = FourierMode((1, 0), 4.0, "sin")
    assert l2_inner(c, c) == pytest.approx(8.0)
    assert l2_inner(c, s) == 0.0
    assert l2_inner(c, FourierMode((0, 1), 4.0)) == 0.0
    assert l2_inner(c, c, "gradient") == pytest.approx(c.q_sq * 8.0)
    g = gram_matrix([c, s])
    assert np.allclose(g, np.diag([8.0, 8.0]))


@pytest.mark.parametrize("d", [1, 2])
def test_bump_norms_match_quadrature(d):
    f = CompactBump((2.0,) * d, 1.3, amplitude=0.7, id="a")
    g = CompactBump((2.0,) * d, 1.3, amplitude=0.7, id="b")
    assert l2_inner(f, g) == pytest.approx(f.norm0_sq, rel=1e-5)
    assert l2_inner(f, g, "gradient") == pytest.approx(f.grad_norm_sq, rel=1e-5)


def test_bump_laplacian_is_hessian_trace():
    f = CompactBump((0.0, 0.0, 0.0), 1.0)
    x = np.array([[0.1, 0.2, -0.3], [0.5, 0.1, 0.0], [2.0, 0.0, 0.0]])
    assert np.allclose(f.laplacian(x), np.trace(f.hessian(x), axis1=1, axis2=2))
    assert f.value(x)[-1] == 0.0


def test_hermite_proxy_derivatives():
    f = HermiteProxy((2, 1), (0.0, 0.0))
    x = np.array([[0.3, -0.4]])
    h = 1e-6
    for k in range(2):
        e = np.zeros((1, 2))
        e[0, k] = h
        fd = (f.value(x + e) - f.value(x - e)) / (2 * h)
        assert f.gradient(x)[0, k] == pytest.approx(fd[0], rel=1e-6, abs=1e-10)
    assert f.laplacian(x)[0] == pytest.approx(np.trace(f.hessian(x)[0]), rel=1e-8)
    # ‖Δe_n‖² = ‖(|x|² − λ) e_n‖² by Gauss–Hermite, positive and finite
    assert f.lap_norm_sq > 0 and math.isfinite(f.lap_norm_sq)
    assert f.hess_norm_sq == pytest.approx(f.lap_norm_sq, rel=1e-8)


def test_fourier_hessian_norm_equals_laplacian_norm():
    f = FourierMode((2, 1), 5.0)
    assert f.hess_norm_sq == pytest.approx(f.lap_norm_sq)


def test_support_checks():
    with pytest.raises(SupportError):
        FourierMode((1,), 4.0).check_support(Torus(5.0, 1))
    with pytest.raises(SupportError):
        CompactBump((2.0,), 2.5).check_support(Torus(4.0, 1))
    with pytest.raises(SupportError):
        HermiteProxy((3,), (1.0,)).check_support(Torus(4.0, 1))


def test_s_in_scales_positions():
    gamma = Configuration(Torus(8.0, 1), [[2.0], [6.0]])
    scaled = s_in(gamma, 0.5)
    assert scaled.torus.L == pytest.approx(4.0)
    assert np.allclose(scaled.positions, [[1.0], [3.0]])
    with pytest.raises(ValueError):
        s_in(gamma, 1.5)


def test_constant_mode_field_is_centered():
    gamma = Configuration(Torus(8.0, 1), [[2.0], [6.0]])
    sf = ScaledField(gamma, 0.5, rho1=0.25)
    assert fluctuation_field(sf, FourierMode((0,), 4.0)) == pytest.approx(0.0, abs=1e-12)
    empty = ScaledField(Configuration.empty(Torus(8.0, 1)), 0.5, rho1=0.25)
    # ε^{1/2}·(0 − 0.25·2·4)
    assert fluctuation_field(empty, FourierMode((0,), 4.0)) == pytest.approx(-math.sqrt(0.5) * 2.0)


def test_ideal_gas_field_variance_is_white_noise():
    eps, L0, z = 0.25, 10.0, 1.0
    p = GibbsParams(0.0, z, Torus(L0 / eps, 1), PairPotential.zero(1))
    fs = [FourierMode((1,), L0), CompactBump((5.0,), 2.0, period=L0)]
    values = np.array([field_pairings(ScaledField(c, eps, z), fs) for c in sample_ensemble(p, 4000, 1, 0, 3)])
    assert np.allclose(values.mean(axis=0), 0.0, atol=0.15)
    for j, f in enumerate(fs):
        assert values[:, j].var(ddof=1) == pytest.approx(z * f.norm0_sq, rel=0.1)


def test_hermite_basis_pairings_and_sobolev_norm():
    basis = HermiteBasis(1, max_level=3, center=[10.0])
    gamma = Configuration(Torus(20.0, 1), [[9.5], [10.5]])
    sf = ScaledField(gamma, 1.0, rho1=0.0)
    pairs = basis.pairings(sf)
    assert pairs[0] == pytest.approx(2.0 * hermite_eval(0, 0.5))
    assert pairs[1] == pytest.approx(0.0, abs=1e-12)
    norm = sobolev_norm_neg(pairs, 2, basis)
    assert norm.value == pytest.approx(np.sum(basis.eigenvalues ** -2.0 * pairs ** 2))
    with pytest.raises(ValueError):
        sobolev_norm_neg(pairs, 1, basis)
    with pytest.raises(SupportError):
        HermiteBasis(1, max_level=3, center=[2.0]).pairings(sf)


def test_cylinder_functions():
    f = FourierMode((1,), 4.0)
    F = CylinderFunction.sine(f)
    assert F.g(np.array([0.3])) == pytest.approx(math.sin(0.3))
    assert np.allclose(F.gradient_matrix(np.array([[0.0], [math.pi]])), [[1.0], [-1.0]])
    assert np.allclose(CylinderFunction.linear(f).gradient_matrix(np.zeros((3, 1))), 1.0)


def test_field_series_file(tmp_path):
    series = FieldSeries(np.array([0.0, 0.1]), np.array([[1.0, 2.0], [3.0, 4.0]]), ["a", "b"], {"eps": 0.5})
    path = tmp_path / "series.csv"
    series.to_file(path)
    back = FieldSeries.from_file(path)
    assert back.ids == ["a", "b"]
    assert np.allclose(back.column("b"), [2.0, 4.0])
    assert np.allclose(back.times, series.times)
