# fluctuations/store.py
"""
Plain-text persistence: snapshots, field series, delimited rows and manifests.

Floats are written with Python's shortest round-trip repr, so reading a file back
reproduces the exact doubles that were written.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np
import yaml

from fluctuations.configuration import Configuration, Torus


def _cell(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into YAML-safe builtins."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "value") and not isinstance(value, (int, float, str)):
        return _plain(value.value)
    return value


# ---------- snapshots ----------
def write_snapshot(c: Configuration, path: str | Path, seed: int, step: int) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        f.write(f"{c.torus.d} {float(c.torus.L)!r} {c.n} {int(seed)} {int(step)}\n")
        for x in c.positions:
            f.write(" ".join(repr(float(v)) for v in x) + "\n")


def read_snapshot(path: str | Path, cutoff: float = 0.0) -> Tuple[Configuration, int, int]:
    """Return (configuration, seed, step)."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Snapshot not found: {p}")
    with p.open("r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 5:
            raise ValueError(f"malformed snapshot header in {p}: {header}")
        d, L, n, seed, step = int(header[0]), float(header[1]), int(header[2]), int(header[3]), int(header[4])
        rows = [[float(v) for v in line.split()] for line in f if line.strip()]
    if len(rows) != n:
        raise ValueError(f"snapshot {p} declares n={n} but holds {len(rows)} rows")
    pts = np.array(rows, dtype=float).reshape(n, d)
    return Configuration(Torus(L, d), pts, cutoff), seed, step


# ---------- delimited rows ----------
def write_csv(records: Sequence[Mapping[str, Any]], path: str | Path,
              fieldnames: Sequence[str] | None = None) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    keys = list(fieldnames) if fieldnames is not None else (list(records[0].keys()) if records else [])
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: _cell(rec.get(k, "")) for k in keys})


def read_csv(path: str | Path) -> List[Dict[str, str]]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"CSV not found: {p}")
    with p.open("r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


# ---------- field series ----------
def write_series(path: str | Path, meta: Mapping[str, Any], columns: Sequence[str],
                 times: Iterable[float], values: np.ndarray) -> None:
    """Header line of key=value metadata, then a CSV block t,<columns...>."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values, dtype=float)
    with p.open("w", encoding="utf-8", newline="") as f:
        f.write("# " + " ".join(f"{k}={_cell(v)}" for k, v in meta.items()) + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t", *columns])
        for t, row in zip(times, values):
            writer.writerow([repr(float(t)), *(repr(float(v)) for v in row)])


def read_series(path: str | Path) -> Tuple[Dict[str, str], List[str], np.ndarray, np.ndarray]:
    """Return (meta, columns, times, values)."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Series not found: {p}")
    with p.open("r", encoding="utf-8", newline="") as f:
        first = f.readline().lstrip("#").split()
        meta = dict(item.split("=", 1) for item in first if "=" in item)
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return meta, header[1:], arr[:, 0], arr[:, 1:]


# ---------- manifests ----------
def write_manifest(data: Mapping[str, Any], path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        yaml.safe_dump(_plain(dict(data)), f, sort_keys=True, default_flow_style=False)


def read_manifest(path: str | Path) -> Dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Manifest not found: {p}")
    with p.open("r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def write_ensemble(configs: Sequence[Configuration], directory: str | Path,
                   manifest: Mapping[str, Any], seed: int, thinning: int, burn_in: int) -> List[Path]:
    """Snapshot files snap_00000.txt... plus manifest.yaml in `directory`."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    width = max(5, int(math.log10(max(1, len(configs)))) + 1)
    paths = []
    for k, c in enumerate(configs):
        path = out / f"snap_{k:0{width}d}.txt"
        write_snapshot(c, path, seed=seed, step=burn_in + (k + 1) * thinning)
        paths.append(path)
    write_manifest({**dict(manifest), "snapshots": [p.name for p in paths]}, out / "manifest.yaml")
    return paths
