from __future__ import annotations

import numpy as np
import pytest

from fluctuations import store
from fluctuations.configuration import Configuration, Torus


def test_snapshot_preserves_positions_exactly(tmp_path, rng):
    t = Torus(7.5, 2)
    c = Configuration(t, t.random_points(rng, 12))
    store.write_snapshot(c, tmp_path / "snap.txt", seed=42, step=300)
    back, seed, step = store.read_snapshot(tmp_path / "snap.txt")
    assert (seed, step) == (42, 300)
    assert back.torus == t
    assert np.array_equal(back.positions, c.positions)


def test_empty_snapshot(tmp_path):
    c = Configuration.empty(Torus(3.0, 1))
    store.write_snapshot(c, tmp_path / "empty.txt", seed=1, step=0)
    back, _, _ = store.read_snapshot(tmp_path / "empty.txt")
    assert back.n == 0


def test_malformed_snapshot_rejected(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 3.0 2 0 0\n0.5\n", encoding="utf-8")
    with pytest.raises(ValueError):
        store.read_snapshot(path)
    with pytest.raises(FileNotFoundError):
        store.read_snapshot(tmp_path / "missing.txt")


def test_csv_cells_keep_float_precision(tmp_path):
    rows = [{"a": 0.1 + 0.2, "b": np.int64(3), "c": "x"}]
    store.write_csv(rows, tmp_path / "t.csv")
    back = store.read_csv(tmp_path / "t.csv")
    assert float(back[0]["a"]) == 0.1 + 0.2
    assert back[0]["b"] == "3"


def test_manifest_converts_numpy_values(tmp_path):
    store.write_manifest({"arr": np.arange(3), "x": np.float64(1.5), "flag": np.bool_(True)}, tmp_path / "m.yaml")
    back = store.read_manifest(tmp_path / "m.yaml")
    assert back == {"arr": [0, 1, 2], "x": 1.5, "flag": True}


def test_write_ensemble_lists_snapshots(tmp_path, rng):
    t = Torus(4.0, 1)
    configs = [Configuration(t, t.random_points(rng, k)) for k in (1, 2, 3)]
    paths = store.write_ensemble(configs, tmp_path / "ens", {"eps": 1.0}, seed=5, thinning=10, burn_in=100)
    manifest = store.read_manifest(tmp_path / "ens" / "manifest.yaml")
    assert manifest["snapshots"] == [p.name for p in paths]
    _, _, step = store.read_snapshot(paths[-1])
    assert step == 130
