from __future__ import annotations

import math

import numpy as np
import pytest

from fluctuations.configuration import (
    Configuration,
    Torus,
    check_stability,
    displacement,
    drift,
    interaction_energy,
    pair_displacements,
    particle_energy,
    total_energy,
)
from fluctuations.errors import ClosePairError
from fluctuations.potentials import PairPotential


def test_displacement_is_minimum_image():
    t = Torus(10.0, 2)
    dx = displacement(t, [9.5, 0.5], [0.5, 9.5])
    assert np.allclose(dx, [-1.0, 1.0])
    assert np.all(np.abs(displacement(t, [3.0, 7.0], [8.0, 2.0])) <= 5.0)


def test_wrap_stays_in_box():
    t = Torus(4.0, 1)
    y = t.wrap(np.array([-1e-18, 4.0, 9.0, -3.0]))
    assert np.all((y >= 0) & (y < 4.0))
    assert y[2] == pytest.approx(1.0)


def test_configuration_add_remove_keeps_index(rng):
    t = Torus(8.0, 2)
    c = Configuration.empty(t, cutoff=1.0)
    for x in t.random_points(rng, 40):
        c.add(x)
    assert c.n == 40
    c.remove(3)
    c.move(0, [7.9, 0.1])
    assert c.n == 39
    assert c.cells.count() == 39
    idx, disp = c.neighbors_of([0.05, 0.05])
    assert 0 in idx


def test_pair_list_matches_brute_force(rng):
    t = Torus(6.0, 2)
    c = Configuration(t, t.random_points(rng, 60))
    pl = pair_displacements(c, 1.0)
    brute = set()
    for i in range(c.n):
        for j in range(i + 1, c.n):
            if np.linalg.norm(t.displacement(c.positions[i], c.positions[j])) < 1.0:
                brute.add((i, j))
    assert set(zip(pl.i.tolist(), pl.j.tolist())) == brute


def test_energies_are_pairwise_sums():
    t = Torus(10.0, 1)
    phi = PairPotential.bump(1, height=1.0, width=1.0)
    c = Configuration(t, [[1.0], [1.5], [9.8]], cutoff=1.0)
    # distances 0.5, 1.2 (minimum image), 1.7; only the first is inside the bump
    v = phi.profile(np.array([0.5]))[0][0]
    assert total_energy(c, phi) == pytest.approx(v)
    assert particle_energy(c, phi, [1.0], exclude=0) == pytest.approx(v)
    eta = Configuration(t, [[2.0]])
    assert interaction_energy(eta, c, phi) == pytest.approx(phi.profile(np.array([0.5]))[0][0])


def test_lj_energy_infinite_below_floor():
    t = Torus(10.0, 2)
    phi = PairPotential.lennard_jones(2)
    c = Configuration(t, [[1.0, 1.0], [1.2, 1.0]])
    assert math.isinf(total_energy(c, phi))
    with pytest.raises(ClosePairError) as info:
        drift(c, phi, 0.1)
    assert info.value.pairs == [(0, 1)]


def test_drift_is_antisymmetric():
    t = Torus(10.0, 2)
    phi = PairPotential.bump(2)
    c = Configuration(t, [[1.0, 1.0], [1.4, 1.2], [5.0, 5.0]])
    field = drift(c, phi, 0.5)
    assert np.allclose(field.total, 0.0)
    assert np.allclose(field.vectors[2], 0.0)
    # repulsive: particle 0 is pushed away from particle 1
    assert field.vectors[0][0] < 0


def test_zero_beta_drift_vanishes():
    t = Torus(5.0, 1)
    c = Configuration(t, [[1.0], [1.1]])
    assert not np.any(drift(c, PairPotential.bump(1), 0.0).vectors)


def test_stability_surrogate_for_repulsive_bump(rng):
    t = Torus(5.0, 2)
    c = Configuration(t, t.random_points(rng, 30))
    assert check_stability(c, PairPotential.bump(2))


def test_torus_rejects_short_side():
    with pytest.raises(ValueError):
        Torus(2.0, 2).validate_for(PairPotential.bump(2, width=1.5))
