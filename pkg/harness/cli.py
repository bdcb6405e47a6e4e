#!/usr/bin/env python3
"""
Command-line entrypoint.

Usage:
    python -m harness experiment variance-convergence --config configs/experiments/variance_ideal.yaml
    python -m harness sample --config configs/experiments/oracle_mc.yaml --eps 1
    python -m harness evolve --config configs/experiments/ou_ideal.yaml --eps 0.5 --replica 0
    python -m harness expand --config configs/experiments/curvature_bump.yaml
    python -m harness oracle --config configs/experiments/oracle_mc.yaml
    python -m harness report --dir results

Exit status: 0 all gated rules pass, 1 any rule failed, 2 usage or config error,
3 no failure but some rule inconclusive.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional

import numpy as np
from rich.logging import RichHandler

from fluctuations import store
from fluctuations.errors import OracleTractabilityError
from fluctuations.expansion import coefficient_table
from fluctuations.gibbs import estimate_correlations, run_chain
from fluctuations.oracle import oracle_system, partition_function
from harness import results
from harness.experiments import experiment_ids, get_experiment
from harness.experiments.common import RunContext, replica_series
from harness.factory import (
    STREAM_BOOTSTRAP,
    STREAM_SAMPLE,
    build_coefficients,
    build_gibbs_params,
    build_oracle_spec,
    build_potential,
    build_test_functions,
    load_runtime,
    potential_id,
    seed_for,
)
from harness.schemas import ConfigError, ExperimentConfig, UnknownExperimentError, load_experiment_config

logger = logging.getLogger("harness")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="harness", description="Density-fluctuation experiments for interacting Brownian particles.")
    parser.add_argument("--runtime", default=None, help="Runtime YAML (defaults to $FLUCT_RUNTIME or configs/runtime/default.yaml).")
    parser.add_argument("--workers", type=int, default=None, help="Process-pool size for replicas and chains.")
    parser.add_argument("--log-level", default=None, help="Logging level (INFO, DEBUG, ...).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="Run one acceptance experiment.")
    p.add_argument("id", help=f"Experiment id: {', '.join(experiment_ids())}")
    p.add_argument("--config", required=True, help="Experiment YAML config.")
    p.add_argument("--out", default=None, help="Output directory (defaults to <output_root>/<id>).")

    p = sub.add_parser("sample", help="Sample μ_ε and write snapshots plus correlation estimates.")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("evolve", help="Run one equilibrium Langevin replica and write its field series.")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--replica", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("expand", help="Tabulate ρ⁽¹⁾, χ, D_φ, R_φ over expansion.betas.")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("oracle", help="Finite-volume oracle values for the configured box.")
    p.add_argument("--config", required=True)
    p.add_argument("--points", type=int, default=25, help="Radii in the pair-profile table.")
    p.add_argument("--out", default=None)

    p = sub.add_parser("report", help="Render all results.csv under a directory and write summary.csv.")
    p.add_argument("--dir", required=True)
    return parser.parse_args(argv)


def _setup_logging(level: str) -> None:
    logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]",
                        handlers=[RichHandler(rich_tracebacks=False, show_path=False)], force=True)


def _out_dir(args: argparse.Namespace, cfg: ExperimentConfig, runtime: dict, name: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output.directory:
        return Path(cfg.output.directory)
    return Path(runtime["output_root"]) / name


def _eps_index(cfg: ExperimentConfig, eps: float) -> int:
    for i, e in enumerate(cfg.ladder.eps):
        if np.isclose(e, eps):
            return i
    raise ConfigError("ladder.eps", f"eps={eps:g} is not on the configured ladder {cfg.ladder.eps}")


# ---------------- subcommands ----------------
def cmd_experiment(args, runtime) -> int:
    runner = get_experiment(args.id)
    cfg = load_experiment_config(args.config)
    if cfg.experiment and cfg.experiment != args.id:
        logger.warning("config %s declares experiment %r; running %r", args.config, cfg.experiment, args.id)
    ctx = RunContext(cfg, workers=runtime["workers"], bootstrap_resamples=runtime["bootstrap_resamples"])
    with ctx.timed("total"):
        records = runner(cfg, ctx)
    out = results.write_run(_out_dir(args, cfg, runtime, args.id), args.id, cfg, records, ctx.manifest,
                            ctx.timings, ctx.tables)
    status = results.exit_status(records)
    counts = {o: sum(r.outcome == o for r in records) for o in ("pass", "fail", "inconclusive", "exploratory")}
    logger.info("%s: %s -> exit %d (%s)", args.id, counts, status, out)
    return status


def cmd_sample(args, runtime) -> int:
    cfg = load_experiment_config(args.config)
    i = _eps_index(cfg, args.eps)
    gp = build_gibbs_params(cfg, args.eps)
    mc = cfg.monte_carlo
    seed = seed_for(cfg.seeds.base, i, 0, STREAM_SAMPLE)
    run = run_chain(gp, mc.samples, mc.thinning, mc.burn_in, seed, method=mc.method)
    out = _out_dir(args, cfg, runtime, f"sample_eps{args.eps:g}")
    manifest = {"eps": args.eps, "seed": seed, "method": run.method, "step_size": run.step_size,
                "moves": run.move_stats.as_dict(), "stability_violations": run.stability_violations,
                "config": cfg.model_dump()}
    if runtime["write_snapshots"]:
        store.write_ensemble(run.configurations, out / "snapshots", manifest, seed, mc.thinning, mc.burn_in)
    r_max = mc.r_max if mc.r_max is not None else gp.torus.L / 2.0
    stats = estimate_correlations(run.configurations, gp, np.linspace(0.0, r_max, mc.bins + 1),
                                  n_boot=runtime["bootstrap_resamples"],
                                  rng=seed_for(cfg.seeds.base, i, 0, STREAM_BOOTSTRAP))
    rows = [{"r": c, "rho2": v, "rho2_stderr": s, "u2": u}
            for c, v, s, u in zip(stats.bin_centers, stats.rho2, stats.rho2_stderr, stats.u2)]
    store.write_csv(rows, out / "rho2.csv", ["r", "rho2", "rho2_stderr", "u2"])
    store.write_manifest({**manifest, "rho1": stats.rho1.value, "rho1_stderr": stats.rho1.stderr, "chi": stats.chi.value,
                          "chi_stderr": stats.chi.stderr, "chi_fluct": stats.chi_fluct.value,
                          "autocorrelation_time": stats.autocorrelation_time}, out / "manifest.yaml")
    logger.info("rho1=%.6g±%.2g chi=%.6g±%.2g (%d samples) -> %s", stats.rho1.value, stats.rho1.stderr,
                stats.chi.value, stats.chi.stderr, stats.n_samples, out)
    return results.EXIT_OK


def cmd_evolve(args, runtime) -> int:
    cfg = load_experiment_config(args.config)
    i = _eps_index(cfg, args.eps)
    fs = build_test_functions(cfg)
    coeffs = build_coefficients(cfg)
    series = replica_series((cfg, i, args.eps, args.replica, fs, coeffs.rho1, {}))
    out = _out_dir(args, cfg, runtime, f"evolve_eps{args.eps:g}")
    path = out / f"series_r{args.replica}.csv"
    series.to_file(path)
    logger.info("%d records of %s -> %s", len(series.times), series.ids, path)
    return results.EXIT_OK


def cmd_expand(args, runtime) -> int:
    cfg = load_experiment_config(args.config)
    phi = build_potential(cfg.potential, cfg.state.d)
    rows = coefficient_table(phi, potential_id(cfg), cfg.expansion.betas, z=cfg.state.z)
    out = _out_dir(args, cfg, runtime, "expand")
    store.write_csv(rows, out / "coefficients.csv")
    logger.info("%d coefficient rows -> %s", len(rows), out / "coefficients.csv")
    return results.EXIT_OK


def cmd_oracle(args, runtime) -> int:
    cfg = load_experiment_config(args.config)
    spec = build_oracle_spec(cfg)
    phi = build_potential(cfg.potential, cfg.state.d)
    try:
        system = oracle_system(spec, phi, cfg.state.beta, cfg.state.z)
        Z = partition_function(spec, phi, cfg.state.beta, cfg.state.z)
    except OracleTractabilityError as exc:
        raise ConfigError("oracle", str(exc)) from exc
    center = np.full((1, spec.d), spec.length / 2.0)
    radii = np.linspace(0.0, spec.length / 2.0, args.points)
    rows = [{"r": r, "rho2": v} for r, v in zip(radii, system.pair_profile(radii))]
    out = _out_dir(args, cfg, runtime, "oracle")
    store.write_csv(rows, out / "pair_profile.csv", ["r", "rho2"])
    store.write_manifest({
        "spec": asdict(spec), "beta": cfg.state.beta, "z": cfg.state.z, "potential": cfg.potential.model_dump(),
        "partition_function": Z.value, "remainder": Z.remainder, "flagged": Z.flagged,
        "rho1_center": float(system.density_profile(center)[0]),
        "mean_particle_number": system.mean_particle_number(),
    }, out / "manifest.yaml")
    logger.info("Z=%.10g (remainder %.2g) -> %s", Z.value, Z.remainder, out)
    return results.EXIT_OK


def cmd_report(args, runtime) -> int:
    try:
        return results.report(args.dir)
    except FileNotFoundError as exc:
        logger.error("%s", exc)
        return results.EXIT_USAGE


COMMANDS = {
    "experiment": cmd_experiment,
    "sample": cmd_sample,
    "evolve": cmd_evolve,
    "expand": cmd_expand,
    "oracle": cmd_oracle,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    runtime = load_runtime(args.runtime)
    if args.workers is not None:
        runtime["workers"] = max(1, args.workers)
    _setup_logging((args.log_level or runtime["log_level"]).upper())
    try:
        return COMMANDS[args.command](args, runtime)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return results.EXIT_USAGE
    except UnknownExperimentError as exc:
        logger.error("%s", exc.args[0])
        return results.EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
