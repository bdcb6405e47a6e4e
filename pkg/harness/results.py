"""
harness/results.py

Result files for one experiment run, and the `report` rendering.
- results.csv: ResultRecord rows, deterministic given (config, seeds).
- manifest.yaml: resolved config with all defaults, seeds, move statistics, coefficients.
- timings.csv: wall-clock per stage; kept out of results.csv so reruns compare byte for byte.
- <table>.csv: plot-ready extra tables an experiment chose to emit.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import pandas as pd
from rich.console import Console
from rich.table import Table

from fluctuations import store
from harness.schemas import RESULT_FIELDS, ExperimentConfig, ResultRecord

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3

_STYLE = {"pass": "green", "fail": "bold red", "inconclusive": "yellow", "exploratory": "cyan"}


def exit_status(records: Iterable[ResultRecord]) -> int:
    outcomes = {r.outcome for r in records}
    if "fail" in outcomes:
        return EXIT_FAIL
    if "inconclusive" in outcomes:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _ordered(records: Sequence[ResultRecord]) -> List[ResultRecord]:
    """Stable sort by ε, largest first; records without ε go last."""
    return sorted(records, key=lambda r: (r.eps is None, -(r.eps or 0.0)))


def write_run(directory: str | Path, experiment: str, cfg: ExperimentConfig, records: Sequence[ResultRecord],
              manifest: Mapping[str, Any], timings: Sequence[Mapping[str, Any]],
              tables: Mapping[str, Sequence[Mapping[str, Any]]]) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r.model_dump() for r in _ordered(records)]
    store.write_csv(rows, out / "results.csv", RESULT_FIELDS)
    store.write_manifest({
        "experiment": experiment,
        "config": cfg.model_dump(),
        "outcomes": _counts(records),
        "exit_status": exit_status(records),
        **dict(manifest),
    }, out / "manifest.yaml")
    store.write_csv(list(timings), out / "timings.csv", ["label", "seconds"])
    for name, table in tables.items():
        if table:
            store.write_csv(list(table), out / f"{name}.csv")
    logger.info("wrote %d records to %s", len(rows), out)
    return out


def _counts(records: Iterable[ResultRecord]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for r in records:
        counts[r.outcome] = counts.get(r.outcome, 0) + 1
    return dict(sorted(counts.items()))


def collect(directory: str | Path) -> pd.DataFrame:
    """All results.csv files under `directory` as one frame."""
    root = Path(directory)
    paths = sorted(root.rglob("results.csv"))
    if not paths:
        raise FileNotFoundError(f"no results.csv under {root}")
    frames = [pd.read_csv(p).assign(run=str(p.parent.relative_to(root)) or ".") for p in paths]
    return pd.concat(frames, ignore_index=True)


def summarize(df: pd.DataFrame) -> pd.DataFrame:
    """Outcome counts per (run, experiment)."""
    counts = df.groupby(["run", "experiment", "outcome"]).size().unstack(fill_value=0)
    for col in ("pass", "fail", "inconclusive", "exploratory"):
        if col not in counts.columns:
            counts[col] = 0
    return counts[["pass", "fail", "inconclusive", "exploratory"]].reset_index()


def render(df: pd.DataFrame, console: Console | None = None) -> None:
    console = console or Console()
    table = Table(title="Results", show_lines=False)
    for col in ("run", "rule", "eps", "parameter", "estimate", "stderr", "target", "outcome"):
        table.add_column(col, justify="right" if col in ("eps", "estimate", "stderr", "target") else "left")
    for row in df.itertuples(index=False):
        style = _STYLE.get(row.outcome, "")
        table.add_row(
            str(row.run), str(row.rule), _fmt(row.eps), str(row.parameter if pd.notna(row.parameter) else ""),
            _fmt(row.estimate), _fmt(row.stderr), _fmt(row.target), f"[{style}]{row.outcome}[/]" if style else row.outcome,
        )
    console.print(table)
    console.print(summarize(df).to_string(index=False))


def _fmt(x: Any) -> str:
    if x is None or (isinstance(x, float) and pd.isna(x)):
        return ""
    try:
        return f"{float(x):.6g}"
    except (TypeError, ValueError):
        return str(x)


def report(directory: str | Path, console: Console | None = None) -> int:
    """Render every run under `directory`, write summary.csv next to them, return the combined exit status."""
    df = collect(directory)
    render(df, console)
    out = Path(directory) / "summary.csv"
    df.to_csv(out, index=False, lineterminator="\n")
    logger.info("summary written to %s", out)
    outcomes = set(df["outcome"])
    if "fail" in outcomes:
        return EXIT_FAIL
    if "inconclusive" in outcomes:
        return EXIT_INCONCLUSIVE
    return EXIT_OK
