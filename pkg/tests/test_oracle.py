from __future__ import annotations

import math

import numpy as np
import pytest

from fluctuations.configuration import Configuration, Torus
from fluctuations.errors import OracleTractabilityError
from fluctuations.gibbs import GibbsParams, estimate_correlations, sample_ensemble
from fluctuations.oracle import (
    FiniteConfigurationFunction,
    FiniteVolumeSpec,
    beta_derivative_check,
    correlation_exact,
    k_transform,
    oracle_system,
    partition_function,
)
from fluctuations.potentials import PairPotential


def test_ideal_gas_partition_function():
    spec = FiniteVolumeSpec(length=2.0, d=1, n_max=4, quad_points=8)
    z = 0.7
    Z = partition_function(spec, PairPotential.zero(1), 0.0, z)
    expected = sum((z * 2.0) ** n / math.factorial(n) for n in range(5))
    assert Z.value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("eta", [[[0.4]], [[0.4], [1.3]], [[0.1], [0.9], [1.7]]])
def test_ideal_gas_correlations_are_powers_of_z(eta):
    spec = FiniteVolumeSpec(length=2.0, d=1, n_max=3, quad_points=6, truncation="extra")
    assert correlation_exact(spec, PairPotential.zero(1), 0.0, 1.5, eta) == pytest.approx(1.5 ** len(eta))


def test_beta_zero_bump_is_poisson_under_extra_truncation():
    spec = FiniteVolumeSpec(length=3.0, d=1, n_max=3, quad_points=8, truncation="extra")
    phi = PairPotential.bump(1)
    assert correlation_exact(spec, phi, 0.0, 0.8, [[1.0], [1.2]]) == pytest.approx(0.64)


def test_repulsion_lowers_close_pair_density():
    spec = FiniteVolumeSpec(length=4.0, d=1, n_max=4, quad_points=16)
    sys_ = oracle_system(spec, PairPotential.bump(1, height=2.0), 0.5, 1.0)
    prof = sys_.pair_profile(np.array([0.1, 1.5]))
    assert prof[0] < prof[1]
    assert sys_.mean_particle_number() > 0


def test_expectation_of_particle_number_matches():
    spec = FiniteVolumeSpec(length=3.0, d=1, n_max=3, quad_points=8)
    sys_ = oracle_system(spec, PairPotential.bump(1), 0.3, 1.0)
    assert sys_.expectation(lambda pts: float(len(pts))) == pytest.approx(sys_.mean_particle_number(), rel=1e-10)


def test_tractability_guard():
    with pytest.raises(OracleTractabilityError):
        FiniteVolumeSpec(length=3.0, d=2, n_max=5)
    with pytest.raises(ValueError):
        FiniteVolumeSpec(length=3.0, d=3)


def test_points_outside_box_rejected():
    spec = FiniteVolumeSpec(length=2.0, d=1, n_max=2, quad_points=4)
    with pytest.raises(ValueError):
        correlation_exact(spec, PairPotential.zero(1), 0.0, 1.0, [[2.5]])


def test_k_transform_sums_subsets():
    g = FiniteConfigurationFunction.singleton_weight(lambda x: x[0])
    gamma = Configuration(Torus(5.0, 1), [[1.0], [2.0], [0.5]])
    assert k_transform(g, gamma) == pytest.approx(3.5)
    assert k_transform(FiniteConfigurationFunction.empty_indicator(), gamma) == 1.0
    mixed = FiniteConfigurationFunction.combine(
        [2.0, 1.0], [FiniteConfigurationFunction.empty_indicator(), g]
    )
    assert k_transform(mixed, gamma) == pytest.approx(5.5)


def test_k_transform_refuses_unbounded_enumeration():
    everything = FiniteConfigurationFunction(lambda pts: 1.0)
    pts = np.linspace(0.1, 4.9, 20)[:, None]
    with pytest.raises(OracleTractabilityError):
        k_transform(everything, pts)
    assert k_transform(FiniteConfigurationFunction(lambda pts: 1.0), pts[:4]) == 16


@pytest.mark.parametrize("eta", [[[1.5]], [[1.2], [1.8]]])
def test_beta_derivative_identity(eta):
    spec = FiniteVolumeSpec(length=3.0, d=1, n_max=3, quad_points=12)
    check = beta_derivative_check(spec, PairPotential.bump(1), 1.0, 0.2, eta, h=1e-3)
    assert check.rel_error < 1e-3


@pytest.mark.slow
def test_oracle_matches_capped_chain():
    spec = FiniteVolumeSpec(length=6.0, d=1, n_max=4, quad_points=24)
    phi = PairPotential.bump(1)
    sys_ = oracle_system(spec, phi, 0.2, 1.0)
    p = GibbsParams(0.2, 1.0, Torus(6.0, 1), phi, max_particles=4)
    configs = sample_ensemble(p, 20000, 5, 5000, 21, method="mcmc")
    stats = estimate_correlations(configs, p, np.linspace(0.0, 3.0, 7), n_boot=100, rng=2)
    rho1 = sys_.mean_particle_number() / spec.volume
    assert stats.rho1.within(rho1, 3.0, floor=0.02 * rho1)
