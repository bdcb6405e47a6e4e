from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats as sps

from fluctuations.configuration import Configuration, Torus, particle_energy, total_energy
from fluctuations.gibbs import (
    GibbsParams,
    acceptance_log_ratio,
    estimate_correlations,
    ruelle_check,
    run_chain,
    sample_chains,
    sample_ensemble,
)
from fluctuations.potentials import PairPotential


def poisson_params(L: float = 6.0, d: int = 1, z: float = 1.0, **kw) -> GibbsParams:
    return GibbsParams(beta=0.0, z=z, torus=Torus(L, d), potential=PairPotential.zero(d), **kw)


def test_acceptance_ratios():
    assert acceptance_log_ratio("insert", 0, 2.0, 3.0, 0.0, 0.0) == pytest.approx(math.log(6.0))
    assert acceptance_log_ratio("delete", 4, 2.0, 3.0, 0.0, 0.0) == pytest.approx(math.log(4 / 6.0))
    assert acceptance_log_ratio("delete", 0, 2.0, 3.0, 1.0, 0.0) == -math.inf
    assert acceptance_log_ratio("translate", 3, 1.0, 1.0, 0.5, 2.0) == pytest.approx(-1.0)
    assert acceptance_log_ratio("insert", 0, 1.0, 1.0, 1.0, math.inf) == -math.inf
    with pytest.raises(ValueError):
        acceptance_log_ratio("swap", 0, 1.0, 1.0, 1.0, 0.0)


# ---------- detailed balance ----------
def _weight(c: Configuration, p: GibbsParams) -> float:
    """Density of the target against the Lebesgue–Poisson reference: z^n e^{−βE}."""
    e = total_energy(c, p.potential)
    return 0.0 if math.isinf(e) else p.z ** c.n * math.exp(-p.beta * e)


def _accept(log_a: float) -> float:
    return 1.0 if log_a >= 0.0 else math.exp(log_a)


def _translate_density(p: GibbsParams, a: np.ndarray, b: np.ndarray) -> float:
    """Wrapped Gaussian step density from a to b."""
    step = p.torus.displacement(b, a)
    images = np.arange(-2, 3)[:, None] * p.torus.L
    return float(np.prod(np.sum(sps.norm.pdf(step[None, :] + images, scale=p.step_size), axis=0)))


@pytest.mark.parametrize("phi, L", [
    (PairPotential.bump(2, height=2.0, width=1.0), 3.0),
    (PairPotential.lennard_jones(2, r_cut=2.0), 5.0),
])
def test_moves_satisfy_detailed_balance(phi, L):
    p = GibbsParams(0.7, 0.8, Torus(L, 2), phi, move_probabilities=(0.3, 0.2, 0.5), step_size=0.4)
    p_ins, p_del, p_tr = p.move_probabilities
    rng = np.random.default_rng(3)
    r = phi.interaction_range
    for _ in range(25):
        n = int(rng.integers(0, 5))
        eta = Configuration(p.torus, p.torus.random_points(rng, n), cutoff=r)

        # insert x into η against deleting it again from η ∪ {x}
        x = p.torus.random_points(rng, 1)[0]
        grown = Configuration(p.torus, np.vstack([eta.positions, x]), cutoff=r)
        de = particle_energy(eta, phi, x)
        forward = _weight(eta, p) * p_ins / p.volume * _accept(
            acceptance_log_ratio("insert", n, p.z, p.volume, p.beta, de, p_ins, p_del))
        de_back = -particle_energy(grown, phi, x, exclude=n)
        backward = _weight(grown, p) * p_del / (n + 1) * _accept(
            acceptance_log_ratio("delete", n + 1, p.z, p.volume, p.beta, de_back, p_ins, p_del))
        assert forward == pytest.approx(backward, rel=1e-9, abs=1e-300)

        if n == 0:
            continue
        # translate particle i from a to b and back
        i = int(rng.integers(n))
        a = eta.positions[i].copy()
        b = p.torus.wrap(a + p.step_size * rng.standard_normal(2))
        moved = eta.copy()
        moved.move(i, b)
        de = particle_energy(eta, phi, b, exclude=i) - particle_energy(eta, phi, a, exclude=i)
        de_back = particle_energy(moved, phi, a, exclude=i) - particle_energy(moved, phi, b, exclude=i)
        if math.isinf(de) or math.isinf(de_back):
            continue
        q_ab, q_ba = _translate_density(p, a, b), _translate_density(p, b, a)
        assert q_ab == pytest.approx(q_ba)
        forward = _weight(eta, p) * p_tr / n * q_ab * _accept(
            acceptance_log_ratio("translate", n, p.z, p.volume, p.beta, de))
        backward = _weight(moved, p) * p_tr / n * q_ba * _accept(
            acceptance_log_ratio("translate", n, p.z, p.volume, p.beta, de_back))
        assert forward == pytest.approx(backward, rel=1e-9, abs=1e-300)


def test_params_validation():
    with pytest.raises(ValueError):
        poisson_params(z=0.0)
    with pytest.raises(ValueError):
        poisson_params(move_probabilities=(0.0, 0.5, 0.5))
    with pytest.raises(ValueError):
        GibbsParams(0.1, 1.0, Torus(1.5, 1), PairPotential.bump(1))


def test_exact_poisson_sampling_counts():
    p = poisson_params(L=10.0, z=2.0)
    run = run_chain(p, 5000, 1, 0, 7)
    assert run.method == "exact"
    n = np.array([c.n for c in run.configurations])
    assert n.mean() == pytest.approx(20.0, rel=0.03)
    assert n.var() == pytest.approx(20.0, rel=0.1)


def test_mcmc_poisson_matches_exact_moments():
    p = poisson_params(L=5.0)
    run = run_chain(p, 3000, 10, 1000, 11, method="mcmc")
    assert run.method == "mcmc"
    n = np.array([c.n for c in run.configurations])
    assert n.mean() == pytest.approx(5.0, rel=0.1)
    assert run.move_stats.proposed["insert"] > 0


def test_sampling_is_deterministic_per_seed():
    p = GibbsParams(0.5, 1.0, Torus(6.0, 1), PairPotential.bump(1))
    a = sample_ensemble(p, 20, 5, 100, 3)
    b = sample_ensemble(p, 20, 5, 100, 3)
    assert all(np.array_equal(x.positions, y.positions) for x, y in zip(a, b))
    c = sample_ensemble(p, 20, 5, 100, 4)
    assert any(not np.array_equal(x.positions, y.positions) for x, y in zip(a, c))


def test_chains_keep_seed_order():
    p = poisson_params()
    runs = sample_chains(p, [1, 2], 5, 1, 0)
    assert [r.seed for r in runs] == [1, 2]


def test_max_particles_caps_the_chain():
    p = GibbsParams(0.2, 1.0, Torus(6.0, 1), PairPotential.bump(1), max_particles=3)
    run = run_chain(p, 500, 5, 200, 5, method="mcmc")
    assert max(c.n for c in run.configurations) <= 3


def test_exact_requires_poisson_target():
    p = GibbsParams(0.2, 1.0, Torus(6.0, 1), PairPotential.bump(1))
    with pytest.raises(ValueError):
        run_chain(p, 5, 1, 0, 1, method="exact")


def test_poisson_correlations_are_flat():
    p = poisson_params(L=10.0, d=2, z=0.5)
    configs = sample_ensemble(p, 3000, 1, 0, 13)
    stats = estimate_correlations(configs, p, np.linspace(0.0, 2.0, 5), n_boot=100, rng=1)
    assert stats.rho1.within(0.5, 4.0)
    assert np.all(np.abs(stats.rho2 - 0.25) <= 4 * stats.rho2_stderr + 0.01)
    assert stats.chi.within(0.5, 4.0, floor=0.02)
    assert stats.chi_fluct.value == pytest.approx(0.5, rel=0.1)
    assert ruelle_check(stats, 1.0).passed


def test_correlation_bins_are_validated():
    p = poisson_params()
    configs = sample_ensemble(p, 5, 1, 0, 1)
    with pytest.raises(ValueError):
        estimate_correlations(configs, p, [0.0, 4.0])
    with pytest.raises(ValueError):
        estimate_correlations([], p, [0.0, 1.0])
