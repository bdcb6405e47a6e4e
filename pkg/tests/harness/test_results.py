from __future__ import annotations

import math

import pandas as pd
import pytest
from rich.console import Console

from fluctuations import store
from harness import results
from harness.schemas import RESULT_FIELDS, ResultRecord, parse_experiment_config


def _rec(outcome, eps=None, rule="r", estimate=1.0):
    return ResultRecord(experiment="demo", rule=rule, eps=eps, estimate=estimate, outcome=outcome)


def _cfg():
    return parse_experiment_config({
        "potential": {"kind": "zero"},
        "state": {"beta": 0.0, "L0": 5.0, "d": 1},
    })


@pytest.mark.parametrize(
    "outcomes, expected",
    [
        (["pass", "exploratory"], results.EXIT_OK),
        (["pass", "inconclusive"], results.EXIT_INCONCLUSIVE),
        (["inconclusive", "fail", "pass"], results.EXIT_FAIL),
        ([], results.EXIT_OK),
    ],
)
def test_exit_status(outcomes, expected):
    assert results.exit_status([_rec(o) for o in outcomes]) == expected


def test_write_run_files(tmp_path):
    records = [_rec("pass", eps=0.25, rule="small"), _rec("exploratory", rule="slope"), _rec("fail", eps=1.0, rule="big")]
    out = results.write_run(tmp_path / "run", "demo", _cfg(), records, {"seeds": [1, 2]},
                            [{"label": "total", "seconds": 0.5}], {"extra": [{"x": 1.0, "y": 2.0}], "empty": []})

    rows = store.read_csv(out / "results.csv")
    assert list(rows[0].keys()) == RESULT_FIELDS
    # largest ε first, records without ε last
    assert [r["rule"] for r in rows] == ["big", "small", "slope"]
    assert rows[2]["eps"] == ""

    manifest = store.read_manifest(out / "manifest.yaml")
    assert manifest["experiment"] == "demo"
    assert manifest["exit_status"] == results.EXIT_FAIL
    assert manifest["outcomes"] == {"exploratory": 1, "fail": 1, "pass": 1}
    assert manifest["seeds"] == [1, 2]
    assert manifest["config"]["state"]["L0"] == 5.0

    assert store.read_csv(out / "timings.csv")[0]["label"] == "total"
    assert (out / "extra.csv").exists()
    assert not (out / "empty.csv").exists()


def test_results_csv_has_no_wall_clock(tmp_path):
    out = results.write_run(tmp_path, "demo", _cfg(), [_rec("pass")], {}, [{"label": "total", "seconds": 9.9}], {})
    text = (out / "results.csv").read_text(encoding="utf-8")
    assert "seconds" not in text and "9.9" not in text


def test_report_combines_runs(tmp_path):
    results.write_run(tmp_path / "a", "demo", _cfg(), [_rec("pass")], {}, [], {})
    results.write_run(tmp_path / "b", "demo", _cfg(), [_rec("inconclusive"), _rec("exploratory")], {}, [], {})
    console = Console(record=True, width=200)
    status = results.report(tmp_path, console)
    assert status == results.EXIT_INCONCLUSIVE

    summary = pd.read_csv(tmp_path / "summary.csv")
    assert set(summary["run"]) == {"a", "b"}
    assert len(summary) == 3
    assert "demo" in console.export_text()


def test_summarize_counts_per_run():
    df = pd.DataFrame({
        "run": ["a", "a", "b"],
        "experiment": ["x", "x", "x"],
        "outcome": ["pass", "fail", "pass"],
    })
    s = results.summarize(df).set_index("run")
    assert s.loc["a", "pass"] == 1 and s.loc["a", "fail"] == 1
    assert s.loc["b", "inconclusive"] == 0


def test_report_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        results.report(tmp_path / "nothing")


def test_nan_stderr_written_as_text(tmp_path):
    out = results.write_run(tmp_path, "demo", _cfg(), [_rec("pass")], {}, [], {})
    row = store.read_csv(out / "results.csv")[0]
    assert math.isnan(float(row["stderr"]))
    assert row["target"] == ""
