"""Command-line driver: fit models, build fields, solve, roll out.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal assertion.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import artifacts, plots
from .config import RunConfig, load_config
from .errors import DataError, StormReachError
from .kernel import TransitionKernel, load_kernel_cache, save_kernel_cache
from .nowcast import issue_time_from_name, parse_nowcast
from .rollout import rollout
from .scenario import generate_far_start_scenario, generate_gap_scenario
from .solver import ReachAvoidProblem, solve
from .stats import (bic, fit_error_models, fit_normal_mle, load_models,
                    normal_loglik, pair_errors, save_models)
from .stormfield import StormField, build_storm_field

# Distinct deterministic rng streams per pipeline stage, so `plan` alone and
# `plan` inside `all` draw identically.
STAGE_PLAN = 2
STAGE_SIMULATE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _archive_files(config: RunConfig):
    files = sorted(config.archive_dir.glob("nowcast_*.csv"),
                   key=issue_time_from_name)
    if len(files) < 2:
        raise DataError(
            f"archive {config.archive_dir} holds {len(files)} nowcast file(s); "
            f"fitting needs at least 2 consecutive files")
    return files


def cmd_fit(config: RunConfig) -> int:
    files = [parse_nowcast(p) for p in _archive_files(config)]
    models = fit_error_models(files, config.frame, horizons=config.fit_horizons,
                              min_samples=config.fit_min_samples,
                              window=config.fit_window)
    save_models(models, config.models_file)
    samples = pair_errors(files, config.frame, max_horizon=max(config.fit_horizons))
    print(f"fitted {len(models.horizons)} horizon(s) from {len(files)} files "
          f"-> {config.models_file}")
    print("horizon  axis        m         s     BIC(logistic)   BIC(normal)")
    for tau in models.horizons:
        for axis, model in (("x", models.center_x[tau]), ("y", models.center_y[tau])):
            vals = [getattr(s, f"d{axis}") for s in samples
                    if s.horizon == tau and s.dx is not None]
            mean, std = fit_normal_mle(vals)
            b_logi = bic(model.loglik(vals), 2, len(vals))
            b_norm = bic(normal_loglik(vals, mean, std), 2, len(vals))
            flag = "  <- logistic" if b_logi < b_norm else "  <- normal"
            print(f"  {tau:>2}     {axis}   {model.m:>9.4f} {model.s:>9.4f} "
                  f"{b_logi:>14.2f} {b_norm:>13.2f}{flag}")
    for name, g in (("width", models.width_growth), ("height", models.height_growth)):
        print(f"growth {name}: m={g.m:.4f}, scale(s_pix)="
              f"max({g.scale_min:.4f}, {g.scale_a:.4f} + {g.scale_b:.4f} ln s_pix)")
    return 0


def _load_field(config: RunConfig) -> StormField:
    fields_dir = config.out_dir / "fields"
    paths = sorted(fields_dir.glob("field_tau*.csv"),
                   key=lambda p: int(p.stem.removeprefix("field_tau")))
    if not paths:
        raise DataError(f"no field CSVs under {fields_dir}; run `plan` first")
    values = np.stack([artifacts.read_field_csv(p) for p in paths])
    summary = artifacts.read_summary(config.out_dir / "summary.txt")
    return StormField(grid=config.grid, values=values,
                      n_samples=int(summary.get("n_samples", "0") or 0))


def cmd_plan(config: RunConfig) -> int:
    models = load_models(config.models_file)
    nowcast = parse_nowcast(config.nowcast)
    rng = np.random.default_rng([config.seed, STAGE_PLAN])

    t0 = time.perf_counter()
    field = build_storm_field(
        nowcast, config.frame, models, config.grid, clusters=config.clusters,
        n_samples=config.n_samples, rng=rng, n_horizons=config.storm_horizons,
        heading_weight=config.heading_weight)
    t_field = time.perf_counter() - t0

    t0 = time.perf_counter()
    cache_dir = config.out_dir / "cache"
    kernel = load_kernel_cache(config.grid, config.aircraft, cache_dir)
    if kernel is None:
        kernel = TransitionKernel(config.grid, config.aircraft)
        save_kernel_cache(kernel, cache_dir)
    problem = ReachAvoidProblem(grid=config.grid, goal=config.goal, field=field)
    solution = solve(problem, kernel)
    t_solve = time.perf_counter() - t0

    v0 = solution.value_at(config.start, 0)
    artifacts.write_field_csvs(field, config.out_dir / "fields")
    if config.pgm:
        artifacts.write_field_pgms(field, config.out_dir / "fields")
    artifacts.write_value_csvs(solution, config.out_dir / "values")
    artifacts.write_policy_csv(solution, config.out_dir / "policy.csv")
    artifacts.write_summary({
        "seed": config.seed,
        "n_cells": len(nowcast.cells),
        "n_samples": config.n_samples,
        "clusters": config.clusters,
        "horizons": field.n_horizons,
        "n_steps": config.grid.n_steps,
        "start": " ".join(f"{v:.6g}" for v in config.start),
        "goal": " ".join(f"{v:.6g}" for v in config.goal),
        "v0": v0,
    }, config.out_dir / "summary.txt")
    if config.figures:
        fig_dir = config.out_dir / "figures"
        for tau in range(field.values.shape[0]):
            plots.plot_field(field, tau, fig_dir / f"field_tau{tau}.png",
                             goal=config.goal)
        plots.plot_value_slice(
            solution, 0, int(config.grid.heading_cell(config.start[2])),
            fig_dir / "value_t00.png", goal=config.goal, start=config.start)
    # Timings go to stdout only: output files stay byte-identical across reruns.
    print(f"storm field: {t_field:.2f} s  reach-avoid solve: {t_solve:.2f} s")
    print(f"V0(start) = {v0:.4f}")
    return 0


def cmd_simulate(config: RunConfig) -> int:
    policy_path = config.out_dir / "policy.csv"
    if not policy_path.exists():
        raise DataError(f"policy file missing: {policy_path}; run `plan` first")
    policy = artifacts.read_policy_csv(policy_path, config.grid)
    field = None
    observed = None
    if config.scoring == "field":
        field = _load_field(config)
    else:
        if config.observed is None:
            raise DataError("config paths.observed is required for observed scoring")
        observed = artifacts.read_observed_csv(config.observed)
    rng = np.random.default_rng([config.seed, STAGE_SIMULATE])
    t0 = time.perf_counter()
    report, trajectories, controls, outcomes = rollout(
        policy, config.grid, config.aircraft, config.start, config.n_rollouts,
        rng, observed=observed, goal=config.goal, scoring=config.scoring,
        field=field)
    t_roll = time.perf_counter() - t0
    artifacts.write_trajectories_csv(trajectories, controls, outcomes,
                                     config.grid, config.out_dir / "trajectories.csv")
    artifacts.write_envelope_csv(report, config.grid,
                                 config.out_dir / "envelope.csv")
    artifacts.write_summary(artifacts.report_entries(report),
                            config.out_dir / "report.txt")
    if config.figures:
        try:
            bg = _load_field(config)
        except DataError:
            bg = None
        if observed is None and config.observed is not None \
                and config.observed.exists():
            observed = artifacts.read_observed_csv(config.observed)
        plots.plot_rollouts(report, config.out_dir / "figures" / "rollouts.png",
                            field=bg, observed=observed, goal=config.goal,
                            start=config.start)
    print(f"rollouts: {t_roll:.2f} s")
    counts = ", ".join(f"{k}={v}" for k, v in report.counts().items())
    print(f"{report.n_rollouts} rollouts: {counts} "
          f"(success {100.0 * report.success_fraction:.2f}%)")
    return 0


def cmd_all(config: RunConfig) -> int:
    for step in (cmd_fit, cmd_plan, cmd_simulate):
        code = step(config)
        if code != 0:
            return code
    return 0


def cmd_gen_scenario(kind: str, out_dir, seed: int, n_rollouts: int) -> int:
    out_dir = Path(out_dir)
    if kind == "gap":
        scenario = generate_gap_scenario(out_dir, seed, n_rollouts=n_rollouts)
    elif kind == "far":
        scenario = generate_far_start_scenario(out_dir, seed,
                                               n_rollouts=n_rollouts)
    else:
        raise DataError(f"unknown scenario kind {kind!r}")
    print(f"scenario written under {scenario.root}")
    for cfg in scenario.configs:
        print(f"  config: {cfg}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="stormreach",
                     description="Storm-aware reach-avoid trajectory planning")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("fit", "fit error models from a nowcast archive"),
                           ("plan", "build storm fields and solve the reach-avoid program"),
                           ("simulate", "roll out trajectories under the solved policy"),
                           ("all", "fit, plan, and simulate in sequence")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker thread cap (reserved; compute is vectorized)")
    g = sub.add_parser("gen-scenario", help="write a synthetic nowcast scenario")
    g.add_argument("--kind", choices=("gap", "far"), required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=20161219)
    g.add_argument("--rollouts", type=int, default=10_000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-scenario":
            return cmd_gen_scenario(args.kind, args.out, args.seed, args.rollouts)
        config = load_config(args.config, seed=args.seed, out_dir=args.out,
                             threads=args.threads)
        return {"fit": cmd_fit, "plan": cmd_plan,
                "simulate": cmd_simulate, "all": cmd_all}[args.command](config)
    except (StormReachError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
