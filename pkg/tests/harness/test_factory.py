from __future__ import annotations

import math

import pytest

from fluctuations.scaling import CompactBump, FourierMode, HermiteProxy
from harness import factory
from harness.factory import (
    STREAM_DYNAMICS,
    STREAM_SAMPLE,
    build_coefficients,
    build_gibbs_params,
    build_oracle_spec,
    build_potential,
    build_test_functions,
    load_runtime,
    seed_for,
)
from harness.schemas import ConfigError, parse_experiment_config


def _cfg(**over):
    data = {
        "potential": {"kind": "zero"},
        "state": {"beta": 0.0, "z": 1.5, "L0": 10.0, "d": 2},
    }
    data.update(over)
    return parse_experiment_config(data)


# ---------- seeds ----------
def test_seed_for_is_deterministic_and_stream_separated():
    a = seed_for(7, 0, 0, STREAM_SAMPLE)
    assert a == seed_for(7, 0, 0, STREAM_SAMPLE)
    others = {
        seed_for(7, 0, 0, STREAM_DYNAMICS),
        seed_for(7, 1, 0, STREAM_SAMPLE),
        seed_for(7, 0, 1, STREAM_SAMPLE),
        seed_for(8, 0, 0, STREAM_SAMPLE),
    }
    assert a not in others
    assert len(others) == 4


# ---------- test functions ----------
def test_default_test_function_is_first_fourier_mode():
    fs = build_test_functions(_cfg())
    assert len(fs) == 1
    assert isinstance(fs[0], FourierMode)


def test_each_family_is_built():
    cfg = _cfg(test_functions=[
        {"kind": "fourier", "k": [1, 2], "phase": "sin"},
        {"kind": "bump", "id": "b", "radius": 2.0},
        {"kind": "hermite", "id": "h", "index": [1, 0]},
    ])
    fs = build_test_functions(cfg)
    assert [type(f) for f in fs] == [FourierMode, CompactBump, HermiteProxy]
    assert fs[1].id == "b" and fs[2].id == "h"


def test_duplicate_ids_rejected():
    cfg = _cfg(test_functions=[
        {"kind": "bump", "id": "same", "radius": 1.0},
        {"kind": "bump", "id": "same", "radius": 2.0},
    ])
    with pytest.raises(ConfigError, match="duplicate"):
        build_test_functions(cfg)


def test_fourier_wave_vector_length_checked():
    cfg = _cfg(test_functions=[{"kind": "fourier", "k": [1]}])
    with pytest.raises(ConfigError) as exc:
        build_test_functions(cfg)
    assert exc.value.key == "test_functions.0.k"


def test_bump_without_radius_or_outside_box():
    with pytest.raises(ConfigError) as exc:
        build_test_functions(_cfg(test_functions=[{"kind": "bump"}]))
    assert exc.value.key == "test_functions.0.radius"
    with pytest.raises(ConfigError) as exc:
        build_test_functions(_cfg(test_functions=[{"kind": "bump", "radius": 6.0}]))
    assert exc.value.key.startswith("test_functions.0")


# ---------- engine objects ----------
def test_gibbs_params_live_on_the_microscopic_torus():
    cfg = _cfg()
    gp = build_gibbs_params(cfg, 0.25)
    assert gp.torus.L == pytest.approx(40.0)
    assert gp.torus.d == 2
    assert gp.z == 1.5
    assert gp.is_poisson


def test_potential_errors_become_config_errors():
    cfg = _cfg(potential={"kind": "lennard_jones", "r_cut": 0.5})
    with pytest.raises(ConfigError) as exc:
        build_potential(cfg.potential, cfg.state.d)
    assert exc.value.key == "potential"


def test_ideal_coefficients():
    c = build_coefficients(_cfg())
    assert c.rho1 == 1.5 and c.chi == 1.5
    assert c.bulk_diffusion == 1.0
    assert c.r_phi == 0.0


def test_bump_coefficients_reduce_compressibility():
    cfg = _cfg(potential={"kind": "bump"}, state={"beta": 0.1, "z": 0.2, "L0": 4.0, "d": 2})
    c = build_coefficients(cfg)
    assert c.rho1 < 0.2
    assert c.chi < c.rho1
    assert math.isfinite(c.d_phi) and math.isfinite(c.r_phi)


def test_mc_source_samples_the_pair_correlation():
    over = dict(potential={"kind": "bump"}, state={"beta": 0.3, "z": 0.5, "L0": 6.0, "d": 1},
                monte_carlo={"samples": 400, "burn_in": 200, "thinning": 5, "bins": 10},
                seeds={"base": 3})
    mc = build_coefficients(_cfg(expansion={"source": "mc"}, **over))
    cluster = build_coefficients(_cfg(expansion={"source": "cluster"}, **over))
    assert mc.order == "mc_interpolated" and mc.source == "mc_backed"
    assert mc.chi != cluster.chi
    assert mc.rho1 == pytest.approx(cluster.rho1, rel=0.3)
    assert math.isfinite(mc.d_phi) and mc.chi > 0.0
    # sampled once per config
    assert build_coefficients(_cfg(expansion={"source": "mc"}, **over)) is mc


def test_oracle_spec_requires_section():
    with pytest.raises(ConfigError) as exc:
        build_oracle_spec(_cfg())
    assert exc.value.key == "oracle"
    spec = build_oracle_spec(_cfg(oracle={"length": 3.0, "n_max": 3}))
    assert spec.length == 3.0 and spec.n_max == 3 and spec.d == 2


# ---------- runtime ----------
def test_load_runtime_file_and_env_override(tmp_path, monkeypatch):
    p = tmp_path / "rt.yaml"
    p.write_text("runtime:\n  workers: 3\n  output_root: out\n  bootstrap_resamples: 50\n  write_snapshots: false\n",
                 encoding="utf-8")
    for var in ("FLUCT_WORKERS", "FLUCT_OUTPUT_ROOT", "FLUCT_LOG_LEVEL"):
        monkeypatch.delenv(var, raising=False)
    rt = load_runtime(p)
    assert rt["workers"] == 3
    assert str(rt["output_root"]) == "out"
    assert rt["bootstrap_resamples"] == 50
    assert rt["write_snapshots"] is False

    monkeypatch.setenv("FLUCT_WORKERS", "5")
    monkeypatch.setenv("FLUCT_LOG_LEVEL", "debug")
    rt = load_runtime(p)
    assert rt["workers"] == 5
    assert rt["log_level"] == "DEBUG"


def test_load_runtime_missing_file_uses_settings(tmp_path, monkeypatch):
    monkeypatch.delenv("FLUCT_WORKERS", raising=False)
    rt = load_runtime(tmp_path / "absent.yaml")
    assert rt["workers"] == factory.settings.workers
    assert rt["write_snapshots"] is True
