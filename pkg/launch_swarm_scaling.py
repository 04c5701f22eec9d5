#!/usr/bin/env python3
"""
Swarm Scaling - Command Line Launcher

Runs single scenario instances, parameter sweeps, scaling fits, curve
collapses, plot tables and the defender path planner.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd
import structlog
import yaml

from core.analysis.curves import (
    DEFAULT_X,
    collapse_curves,
    curves_from_records,
    merge_curves,
    plot_table,
    write_plot_data,
)
from core.analysis.scaling import (
    fit_breakpoint,
    fit_powerlaw,
    fit_tanh_threshold,
    collapse_score,
)
from core.errors import ConfigError, SwarmScalingError, SweepAbortedError
from core.logging_config import configure_logging
from core.settings import build_params, load_yaml, set_dotted
from core.swarm.planner import (
    PlannerInstance,
    ProblemDocument,
    run_planner_instance,
    solution_summary,
    solve,
    trajectory_frame,
)
from core.sweep.records import load_frame, load_records
from core.sweep.runner import run_single, run_sweep
from core.sweep.spec import Scenario, load_sweep_spec

logger = structlog.get_logger("launch_swarm_scaling")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _write_json(path: Path, document: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, default=str), encoding="utf-8")


def _records_frame(path: str) -> pd.DataFrame:
    if not Path(path).exists():
        raise ConfigError(f"record file not found: {path}", field="records")
    return load_frame(path)


def _scenario_of(frame: pd.DataFrame) -> str:
    if frame.empty:
        raise ConfigError("record file holds no runs", field="records")
    return str(frame["scenario"].iloc[0])


def cmd_run(args) -> int:
    """Run one scenario instance and print its metric"""
    document = load_yaml(args.config) if args.config else {}
    scenario_name = args.scenario or document.get("scenario")
    if scenario_name is None:
        raise ConfigError("scenario is required", field="scenario")
    try:
        scenario = Scenario(scenario_name)
    except ValueError:
        raise ConfigError(f"unknown scenario {scenario_name}", field="scenario") from None
    seed = args.seed if args.seed is not None else int(document.get("seed", 0))
    params = dict(document.get("params", {}))
    for override in args.set or []:
        name, _, value = override.partition("=")
        set_dotted(params, name, yaml.safe_load(value) if value else None)

    print(f"🚀 Running {scenario.value} (seed {seed})")
    record = run_single(scenario, params, seed)
    if record.failed:
        print(f"❌ Run failed: {record.flags[-1]}")
        return EXIT_RUNTIME
    flags = f" [{', '.join(record.flags)}]" if record.flags else ""
    print(f"✅ {record.metric_name} = {record.metric_value:.6g}{flags}")
    if args.out:
        _write_json(Path(args.out), {
            "scenario": record.scenario,
            "seed": record.seed,
            "metric_name": record.metric_name,
            "metric_value": record.metric_value,
            "flags": record.flags,
            "params": record.params,
            "wall_time": record.wall_time,
        })
    return EXIT_OK


def cmd_sweep(args) -> int:
    """Execute a sweep spec"""
    if not args.config:
        raise ConfigError("sweep needs --config", field="config")
    spec = load_sweep_spec(args.config, overrides={"base_seed": args.seed, "output": args.out})
    print(f"🧪 Sweep over {spec.scenario.value}: {', '.join(spec.grid)} x{spec.ensemble}")
    try:
        records = run_sweep(spec, workers=args.workers)
    except SweepAbortedError as exc:
        print(f"❌ Sweep aborted: {exc}")
        print(json.dumps(exc.summary, indent=2, default=str))
        return EXIT_RUNTIME
    failed = sum(1 for r in records if r.failed)
    print(f"✅ {len(records)} records in {spec.output} ({failed} failed)")
    return EXIT_OK


def cmd_fit(args) -> int:
    """Fit every curve of a record file"""
    frame = _records_frame(args.records)
    scenario = _scenario_of(frame)
    x_param = args.x or DEFAULT_X.get(scenario)
    if x_param is None:
        raise ConfigError(f"no default x parameter for {scenario}", field="x")
    curves = curves_from_records(frame, x_param)

    results: List[Dict[str, Any]] = []
    for curve in curves:
        entry: Dict[str, Any] = {"fixed": curve.fixed, "points": len(curve)}
        try:
            if args.kind == "tanh":
                entry.update(fit_tanh_threshold(curve).to_dict())
            elif args.kind == "breakpoint":
                entry.update(fit_breakpoint(curve).to_dict())
            else:
                law = fit_powerlaw(curve.x, curve.y)
                entry.update({
                    "fit_type": "powerlaw",
                    "amplitude": law.amplitude,
                    "exponent": law.exponent,
                    "exponent_stderr": law.exponent_stderr,
                    "r_squared": law.r_squared,
                })
        except SwarmScalingError as exc:
            entry["error"] = str(exc)
            logger.warning("fit.curve_failed", fixed=curve.fixed, error=str(exc))
        results.append(entry)

    out = Path(args.out or Path(args.records).with_suffix(f".{args.kind}.json"))
    _write_json(out, {"scenario": scenario, "x": x_param, "kind": args.kind, "fits": results})
    ok = sum(1 for r in results if "error" not in r)
    print(f"📈 {ok}/{len(results)} curves fitted -> {out}")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_collapse(args) -> int:
    """Master-curve CSV plus the collapse score"""
    frame = _records_frame(args.records)
    scenario = _scenario_of(frame)
    curves = curves_from_records(frame, args.x or DEFAULT_X.get(scenario, ""))
    collapsed = collapse_curves(curves, scenario, alpha=args.alpha)
    scale = "linear" if scenario in ("battle", "search") else "log"
    score = collapse_score(collapsed, scale=scale, statistic=args.statistic)

    out = Path(args.out or Path(args.records).with_suffix(".collapse.csv"))
    write_plot_data(plot_table(collapsed), out, title=f"{scenario} master curve", html=args.html)
    merged = merge_curves(collapsed)
    _write_json(out.with_suffix(".json"), {
        "scenario": scenario,
        "collapse_score": score,
        "scale": scale,
        "statistic": args.statistic,
        "curves": len(collapsed),
        "master_x": merged.x.tolist(),
        "master_y": merged.y.tolist(),
    })
    print(f"🧩 collapse score ({args.statistic}, {scale}) = {score:.4g} -> {out}")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    """Raw and collapsed plot tables for one record file"""
    frame = _records_frame(args.records)
    scenario = _scenario_of(frame)
    curves = curves_from_records(frame, args.x or DEFAULT_X.get(scenario, ""))
    out_dir = Path(args.out or Path(args.records).parent / "plots")
    raw = write_plot_data(plot_table(curves), out_dir / f"{scenario}_raw.csv", title=f"{scenario} raw", html=args.html)
    written = [raw]
    if scenario != "planner":
        collapsed = collapse_curves(curves, scenario, alpha=args.alpha)
        written.append(write_plot_data(
            plot_table(collapsed), out_dir / f"{scenario}_collapsed.csv", title=f"{scenario} collapsed", html=args.html
        ))
    for path in written:
        print(f"📊 {path}")
    return EXIT_OK


def _plan_from_pursuit(args):
    records = [r for r in load_records(args.from_pursuit) if r.scenario == Scenario.PURSUIT.value]
    matches = [r for r in records if r.run_index == args.run_index]
    if not matches:
        raise ConfigError(f"no pursuit record with run index {args.run_index}", field="from_pursuit")
    nested: Dict[str, Any] = {}
    for name, value in matches[0].params.items():
        set_dotted(nested, name, value)
    instance = build_params(PlannerInstance, {"pursuit": nested})
    return run_planner_instance(instance, matches[0].seed).solution, instance.settings


def cmd_plan(args) -> int:
    """Plan defender paths from an instance file or a pursuit record"""
    if args.from_pursuit:
        solution, settings = _plan_from_pursuit(args)
    elif args.config:
        document = load_yaml(args.config)
        document_seed = int(document.pop("seed", 0))
        seed = args.seed if args.seed is not None else document_seed
        if "defender_start" in document:
            explicit = build_params(ProblemDocument, document)
            problem = explicit.problem()
            solution, settings = solve(problem, problem.static_init(), explicit.settings), explicit.settings
        else:
            instance = build_params(PlannerInstance, document)
            solution, settings = run_planner_instance(instance, seed).solution, instance.settings
    else:
        raise ConfigError("plan needs --config or --from-pursuit", field="config")

    out_dir = Path(args.out or "results/plan")
    out_dir.mkdir(parents=True, exist_ok=True)
    trajectory_frame(solution).to_csv(out_dir / "trajectories.csv", index=False)
    summary = solution_summary(solution, settings.deploy_threshold)
    _write_json(out_dir / "solution.json", summary)
    print(f"🛰️ J = {summary['cost']:.4g}, deployed {summary['deployed']}/{len(summary['path_lengths'])}, "
          f"T_final = {summary['horizon']:.4g} -> {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Swarm engagement simulation and scaling analysis",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python launch_swarm_scaling.py run --scenario battle --set n_defenders=80
  python launch_swarm_scaling.py sweep --config configs/battle_threshold.yaml --workers 8
  python launch_swarm_scaling.py fit --records results/battle.csv --kind tanh
  python launch_swarm_scaling.py collapse --records results/search.csv
  python launch_swarm_scaling.py plan --config configs/planner_reference.yaml
        """
    )
    parser.add_argument("--log-level", default="INFO", help="Logging level (default: INFO)")
    parser.add_argument("--log-json", action="store_true", help="Emit JSON log lines")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, default=None, help="Base seed")
    common.add_argument("--workers", type=int, default=1, help="Worker processes (default: 1)")
    common.add_argument("--out", default=None, help="Output path")

    analysis = argparse.ArgumentParser(add_help=False)
    analysis.add_argument("--records", required=True, help="Record CSV written by a sweep")
    analysis.add_argument("--x", default=None, help="Swept parameter on the x axis")
    analysis.add_argument("--alpha", type=float, default=0.6, help="Rate-ratio exponent for battle fallbacks")
    analysis.add_argument("--html", action="store_true", help="Also write plotly HTML figures")

    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="Run a single scenario instance")
    run.add_argument("--scenario", choices=[s.value for s in Scenario])
    run.add_argument("--set", action="append", metavar="NAME=VALUE", help="Override a (dotted) parameter")
    run.set_defaults(handler=cmd_run)

    sweep = sub.add_parser("sweep", parents=[common], help="Execute a sweep spec")
    sweep.set_defaults(handler=cmd_sweep)

    fit = sub.add_parser("fit", parents=[common, analysis], help="Fit each curve of a record file")
    fit.add_argument("--kind", choices=["tanh", "breakpoint", "powerlaw"], default="tanh")
    fit.set_defaults(handler=cmd_fit)

    collapse = sub.add_parser("collapse", parents=[common, analysis], help="Master curve and collapse score")
    collapse.add_argument("--statistic", choices=["median", "max"], default="median")
    collapse.set_defaults(handler=cmd_collapse)

    plot = sub.add_parser("plot-data", parents=[common, analysis], help="Plot-ready x/y tables")
    plot.set_defaults(handler=cmd_plot_data)

    plan = sub.add_parser("plan", parents=[common], help="Plan defender trajectories")
    plan.add_argument("--from-pursuit", default=None, help="Pursuit record CSV to bootstrap from")
    plan.add_argument("--run-index", type=int, default=0, help="Record to use with --from-pursuit")
    plan.set_defaults(handler=cmd_plan)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, json_output=args.log_json)

    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"❌ Configuration error: {exc}")
        return EXIT_CONFIG
    except (SwarmScalingError, RuntimeError, ValueError, OSError) as exc:
        logger.error("launcher.failed", command=args.command, error=str(exc))
        print(f"❌ {args.command} failed: {exc}")
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("\n👋 Interrupted; completed runs are kept on disk")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
