"""Command-line front end.

Subcommands: run, benchmark, sweep, plan, export. Exit codes: 0 success,
2 validation error, 3 incomplete rescue or no path, 4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import io as nr_io
from .environment import ScenarioError, load_scenario
from .field import FieldError, NeuralField, assemble_external_input, relax
from .planner import AttachmentError, NoPathError, PlanQuery, plan_via_matrix
from .runner import (RunError, SweepSpec, benchmark_to_csv, run_benchmark,
                     run_rescue, run_sweep)
from .scenarios import BUILTINS, Scenario, builtin

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INCOMPLETE = 3
EXIT_IO = 4


def _load(path: str) -> Scenario:
    if path in BUILTINS:
        return builtin(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc
    grid, env, params = load_scenario(text)
    name = os.path.splitext(os.path.basename(path))[0]
    return Scenario(name=name, grid=grid, env=env, params=params)


class _IOFailure(Exception):
    pass


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    changes = {}
    if args.sigma is not None:
        changes["sigma"] = args.sigma
    if args.mu is not None:
        changes["mu"] = args.mu
    if args.a_decay is not None:
        changes["a"] = args.a_decay
    if changes:
        params = replace(scenario.params, **changes)
        params.validate()
        scenario = replace(scenario, params=params)
    return scenario


def _load_store(args, grid):
    if not args.features_in:
        return None
    try:
        with open(args.features_in) as fh:
            features_csv = fh.read()
        with open(_matrix_path(args.features_in)) as fh:
            matrix_csv = fh.read()
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc
    return nr_io.load_feature_model(features_csv, matrix_csv, grid)


def _matrix_path(features_path: str) -> str:
    root, ext = os.path.splitext(features_path)
    return f"{root}_matrix{ext or '.csv'}"


def _outdir(args) -> str:
    out = args.out or "."
    if not os.path.isdir(out):
        try:
            os.makedirs(out, exist_ok=True)
        except OSError as exc:
            raise _IOFailure(str(exc)) from exc
    return out


def cmd_run(args) -> int:
    scenario = _apply_overrides(_load(args.scenario), args)
    store = _load_store(args, scenario.grid)
    out = _outdir(args)
    report, sim = run_rescue(scenario, method=args.method, seed=args.seed,
                             store=store, ticks_max=args.ticks_max,
                             snapshot_every=args.snapshot_every,
                             outdir=out, fmt=args.format)
    nr_io.write_text(os.path.join(out, f"{scenario.name}_report.json"),
                     report.to_json(), overwrite=args.overwrite)
    nr_io.write_text(os.path.join(out, f"{scenario.name}_trajectories.csv"),
                     nr_io.trajectories_to_csv(sim.env.robots),
                     overwrite=args.overwrite)
    if args.features_out and len(sim.store):
        nr_io.write_text(args.features_out,
                         nr_io.features_to_csv(sim.store), overwrite=args.overwrite)
        nr_io.write_text(_matrix_path(args.features_out),
                         nr_io.matrix_to_csv(sim.store), overwrite=args.overwrite)
    print(f"{scenario.name} [{args.method}] rescued "
          f"{len(report.rescued)}/{report.target_count} targets in "
          f"{report.ticks} ticks, path {report.path_length:.2f} m, "
          f"idle {report.idle_steps}, collisions {report.collision_events}")
    return EXIT_OK if report.completed else EXIT_INCOMPLETE


def cmd_benchmark(args) -> int:
    names = args.scenarios.split(",") if args.scenarios else None
    rows = run_benchmark(names, seed=args.seed)
    csv = benchmark_to_csv(rows)
    out = _outdir(args)
    nr_io.write_text(os.path.join(out, "benchmark.csv"), csv,
                     overwrite=args.overwrite)
    print(csv)
    if not all(r["completed"] for r in rows):
        return EXIT_INCOMPLETE
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = [float(v) for v in args.values.split(",")]
    spec = SweepSpec(param=args.param, values=values, base=args.scenario)
    results = run_sweep(spec, seed=args.seed)
    out = _outdir(args)
    lines = ["param,value,flagged,reason,path_length_m,saturation_fraction,"
             "saturated,far_to_near_ratio,mean_outside_disk,min_clearance"]
    for res in results:
        plen = f"{res.report.path_length:.6f}" if res.report else ""
        clear = "" if res.min_clearance == float("inf") else f"{res.min_clearance:.6f}"
        lines.append(f"{res.param},{res.value},{int(res.flagged)},{res.reason},"
                     f"{plen},{res.saturation_fraction:.6f},{int(res.saturated)},"
                     f"{res.far_to_near_ratio:.6e},{res.mean_outside_disk:.6e},"
                     f"{clear}")
        if res.snapshot is not None:
            tag = f"sweep_{res.param}_{res.value}"
            if args.format == "pgm":
                nr_io.write_bytes(os.path.join(out, f"{tag}.pgm"),
                                  nr_io.field_to_pgm(res.snapshot,
                                                     builtin(args.scenario).params),
                                  overwrite=args.overwrite)
            else:
                nr_io.write_text(os.path.join(out, f"{tag}.csv"),
                                 nr_io.field_to_csv(res.snapshot),
                                 overwrite=args.overwrite)
    csv = "\n".join(lines)
    nr_io.write_text(os.path.join(out, f"sweep_{args.param}.csv"), csv,
                     overwrite=args.overwrite)
    print(csv)
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = _apply_overrides(_load(args.scenario), args)
    store = _load_store(args, scenario.grid)
    if store is None:
        print("plan requires --features-in", file=sys.stderr)
        return EXIT_VALIDATION
    start = tuple(float(v) for v in args.start.split(","))
    target = tuple(float(v) for v in args.target.split(","))
    fld = NeuralField.zeros(scenario.grid)
    fld.external = assemble_external_input(scenario.env, scenario.grid,
                                           scenario.params, target_ids=[])
    fld, _ = relax(fld, scenario.params)
    try:
        path = plan_via_matrix(PlanQuery(start=start, target=target,
                                         store=store, fld=fld))
    except (AttachmentError, NoPathError) as exc:
        print(f"no heuristic path: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    out = _outdir(args)
    nr_io.write_text(os.path.join(out, "plan.csv"), nr_io.plan_to_csv(path),
                     overwrite=args.overwrite)
    print(nr_io.plan_to_csv(path))
    return EXIT_OK


def cmd_export(args) -> int:
    scenario = _apply_overrides(_load(args.scenario), args)
    out = _outdir(args)
    if args.entity == "field":
        fld = NeuralField.zeros(scenario.grid)
        fld.external = assemble_external_input(scenario.env, scenario.grid,
                                               scenario.params)
        fld, _ = relax(fld, scenario.params)
        if args.format == "pgm":
            nr_io.write_bytes(os.path.join(out, f"{scenario.name}_field.pgm"),
                              nr_io.field_to_pgm(fld, scenario.params),
                              overwrite=args.overwrite)
        else:
            nr_io.write_text(os.path.join(out, f"{scenario.name}_field.csv"),
                             nr_io.field_to_csv(fld), overwrite=args.overwrite)
    elif args.entity in ("features", "matrix"):
        store = _load_store(args, scenario.grid)
        if store is None:
            print("export features/matrix requires --features-in", file=sys.stderr)
            return EXIT_VALIDATION
        content = (nr_io.features_to_csv(store) if args.entity == "features"
                   else nr_io.matrix_to_csv(store))
        nr_io.write_text(os.path.join(out, f"{scenario.name}_{args.entity}.csv"),
                         content, overwrite=args.overwrite)
    elif args.entity == "trajectories":
        report, sim = run_rescue(scenario, method=args.method, seed=args.seed,
                                 ticks_max=args.ticks_max)
        nr_io.write_text(os.path.join(out, f"{scenario.name}_trajectories.csv"),
                         nr_io.trajectories_to_csv(sim.env.robots),
                         overwrite=args.overwrite)
    else:
        print(f"unknown entity {args.entity}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurorescue",
        description="Neural-field rescue planning: simulate, benchmark, sweep, plan.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True,
                       help="scenario JSON path or builtin name "
                            f"({', '.join(sorted(BUILTINS))})")
        p.add_argument("--method", choices=["binn", "flbbinn"], default="binn")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--snapshot-every", type=int, default=0)
        p.add_argument("--ticks-max", type=int, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--mu", type=float, default=None)
        p.add_argument("--a-decay", type=float, default=None)
        p.add_argument("--features-in", default=None)
        p.add_argument("--features-out", default=None)
        p.add_argument("--format", choices=["csv", "pgm"], default="csv")
        p.add_argument("--overwrite", action="store_true")

    p_run = sub.add_parser("run", help="run one rescue scenario")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("benchmark", help="method comparison table")
    common(p_bench)
    p_bench.add_argument("--scenarios", default=None,
                         help="comma-separated builtin names")
    p_bench.set_defaults(func=cmd_benchmark)
    for action in p_bench._actions:
        if action.dest == "scenario":
            action.required = False
            action.default = "static"

    p_sweep = sub.add_parser("sweep", help="parameter sweep")
    common(p_sweep)
    p_sweep.add_argument("--param", choices=["a", "mu", "sigma"], required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_plan = sub.add_parser("plan", help="heuristic path over a learned model")
    common(p_plan)
    p_plan.add_argument("--start", required=True, help="x,y meters")
    p_plan.add_argument("--target", required=True, help="x,y meters")
    p_plan.set_defaults(func=cmd_plan)

    p_export = sub.add_parser("export", help="export a snapshot entity")
    common(p_export)
    p_export.add_argument("--entity",
                          choices=["field", "features", "matrix", "trajectories"],
                          default="field")
    p_export.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, FieldError, RunError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (_IOFailure, nr_io.ExportError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
