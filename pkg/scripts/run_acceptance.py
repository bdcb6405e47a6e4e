#!/usr/bin/env python3
"""
Run the acceptance suite: every config under configs/experiments, one output directory each,
then the combined report.

Usage:
    python -m scripts.run_acceptance --out results/acceptance --workers 4
    python -m scripts.run_acceptance --only variance_ideal ou_ideal
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Sequence

import yaml
from rich.console import Console
from rich.table import Table

from harness import results
from harness.cli import main as harness_main

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "configs" / "experiments"


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Run every acceptance experiment and report.")
    parser.add_argument("--configs", default=str(CONFIG_DIR), help="Directory of experiment YAML configs.")
    parser.add_argument("--out", default="results/acceptance", help="Root directory for per-config outputs.")
    parser.add_argument("--workers", type=int, default=None, help="Process-pool size passed to the harness.")
    parser.add_argument("--only", nargs="*", default=None, help="Config stems to run (default: all).")
    return parser.parse_args()


def discover(config_dir: Path, only: Sequence[str] | None) -> List[Path]:
    paths = sorted(config_dir.glob("*.yaml"))
    if only:
        wanted = set(only)
        missing = wanted - {p.stem for p in paths}
        if missing:
            raise SystemExit(f"[error] unknown configs: {', '.join(sorted(missing))}")
        paths = [p for p in paths if p.stem in wanted]
    return paths


def experiment_of(path: Path) -> str:
    with path.open("r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    exp = data.get("experiment")
    if not exp:
        raise SystemExit(f"[error] {path} does not declare an experiment id")
    return str(exp)


def main() -> int:
    args = parse_args()
    out_root = Path(args.out)
    statuses: Dict[str, int] = {}
    for path in discover(Path(args.configs), args.only):
        exp = experiment_of(path)
        argv = ([] if args.workers is None else ["--workers", str(args.workers)])
        argv += ["experiment", exp, "--config", str(path), "--out", str(out_root / path.stem)]
        print(f"[run] {path.stem} ({exp})")
        statuses[path.stem] = harness_main(argv)

    table = Table(title="Acceptance")
    table.add_column("config")
    table.add_column("exit", justify="right")
    for stem, status in statuses.items():
        style = {results.EXIT_OK: "green", results.EXIT_FAIL: "bold red"}.get(status, "yellow")
        table.add_row(stem, f"[{style}]{status}[/]")
    Console().print(table)

    if not statuses:
        print("[warn] no configs found")
        return results.EXIT_USAGE
    if any(s == results.EXIT_USAGE for s in statuses.values()):
        return results.EXIT_USAGE
    return results.report(out_root)


if __name__ == "__main__":
    sys.exit(main())
