"""Command-line front end.

Exit statuses: 0 ok, 1 infeasible, 2 usage or config error, 3 oracle
inconclusive, 4 simulation diverged.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .oracle import solve_centralized
from .plotting import line_chart_svg
from .policies import POLICY_NAMES
from .simulator import CSV_FIELDS, DivergenceError, read_csv, run, summarize, write_csv

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_INCONCLUSIVE, EXIT_DIVERGED = 0, 1, 2, 3, 4
OUTPUT_DIR_ENV = "ABPNET_OUTPUT_DIR"

OVERRIDE_HELP = (
    "Flag overrides (--policy, --seed, --epsilon, --add-order, --horizon) take "
    "precedence over the values in the config file."
)


class UsageError(Exception):
    pass


def _default_dir(arg=None) -> Path:
    return Path(arg or os.environ.get(OUTPUT_DIR_ENV) or ".")


def _check_policy(name):
    if name is not None and name not in POLICY_NAMES:
        raise UsageError(f"unknown policy: {name} (choose from {', '.join(POLICY_NAMES)})")


def _overrides(args) -> dict:
    _check_policy(getattr(args, "policy", None))
    return {
        "policy": getattr(args, "policy", None),
        "seed": getattr(args, "seed", None),
        "epsilon": getattr(args, "epsilon", None),
        "add_order": getattr(args, "add_order", None),
        "horizon": getattr(args, "horizon", None),
    }


def regime_means(arrivals) -> list:
    """Mean arrival matrices the network must carry (one per switching regime)."""
    if arrivals.kind == "switching":
        return [arrivals.mean_at(0), arrivals.mean_at(arrivals.period)]
    return [arrivals.mean]


def validate_scenario(scenario, tol=1e-6):
    """Worst oracle verdict over all arrival regimes: ``(status, slack)``."""
    net = scenario.network
    worst = ("feasible", float("inf"))
    rank = {"feasible": 0, "inconclusive": 1, "infeasible": 2}
    for mean in regime_means(scenario.arrivals):
        rep = solve_centralized(net, mean, tol=tol)
        if rank[rep.status] > rank[worst[0]] or (rep.status == worst[0] and rep.slack < worst[1]):
            worst = (rep.status, rep.slack)
    return worst


def _run_one(config, overrides, csv_path, svg_path=None):
    """Run one scenario, write its CSV, return ``(exit status, summary line)``."""
    scenario = load_config(config, **overrides)
    try:
        trace = run(scenario)
        status, note = EXIT_OK, ""
    except DivergenceError as exc:
        trace, status, note = exc.trace, EXIT_DIVERGED, f" diverged: {exc}"
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(trace, csv_path)
    if svg_path:
        q = np.array([r.total_queue for r in trace])
        Path(svg_path).write_text(
            line_chart_svg({scenario.policy.name: (np.arange(len(q)), q)}, ylabel="total_queue"),
            encoding="utf-8",
        )
    s = summarize(trace, scenario.run.warmup)
    line = (
        f"policy={scenario.policy.name} seed={scenario.run.seed} slots={s['slots']} "
        f"stabilization_slot={s['stabilization_slot']} "
        f"tail_mean_queue={s['tail_mean_queue']:.6g} csv={csv_path}{note}"
    )
    return status, line


def cmd_run(args) -> int:
    overrides = _overrides(args)
    scenario = load_config(args.config, **overrides)
    csv_path = args.csv or scenario.output.csv_path
    if csv_path is None:
        stem = Path(args.config).stem
        csv_path = _default_dir() / f"{stem}_{scenario.policy.name}_s{scenario.run.seed}.csv"
    svg_path = args.svg or scenario.output.svg_path
    status, line = _run_one(args.config, overrides, csv_path, svg_path)
    print(line)
    if status == EXIT_DIVERGED:
        print(line, file=sys.stderr)
    return status


def _sweep_job(job):
    config, overrides, csv_path = job
    try:
        return _run_one(config, overrides, csv_path)
    except ConfigError as exc:
        return EXIT_USAGE, f"error: {exc}"


def cmd_sweep(args) -> int:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not policies or not seeds:
        raise UsageError("need at least one policy and one seed")
    for p in policies:
        _check_policy(p)
    outdir = _default_dir(args.outdir)
    stem = Path(args.config).stem
    load_config(args.config)  # fail fast on a broken file
    jobs = []
    for seed in seeds:
        for pol in policies:
            ov = {"policy": pol, "seed": seed, "epsilon": args.epsilon,
                  "add_order": args.add_order, "horizon": args.horizon}
            jobs.append((args.config, ov, outdir / f"{stem}_{pol}_s{seed}.csv"))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    worst = EXIT_OK
    for status, line in results:
        print(line)
        worst = max(worst, status)
    return worst


def cmd_plot(args) -> int:
    series = {}
    for path in args.csv:
        try:
            data = read_csv(path)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if args.metric not in data:
            raise UsageError(f"unknown metric {args.metric}; columns are {', '.join(CSV_FIELDS)}")
        series[Path(path).stem] = (data["t"], data[args.metric])
    Path(args.output).write_text(
        line_chart_svg(series, title=args.title or args.metric, ylabel=args.metric), encoding="utf-8"
    )
    print(f"wrote {args.output} ({len(series)} series)")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = load_config(args.config, **_overrides(args))
    status, slack = validate_scenario(scenario, tol=args.tol)
    print(f"{status} slack={slack:.6g}")
    return {"feasible": EXIT_OK, "infeasible": EXIT_INFEASIBLE, "inconclusive": EXIT_INCONCLUSIVE}[status]


def _add_overrides(p, with_policy=True):
    if with_policy:
        p.add_argument("--policy", help=f"one of {', '.join(POLICY_NAMES)}")
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--add-order", dest="add_order", type=int)
    p.add_argument("--horizon", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abpnet",
        description="Backpressure-family routing simulator. " + OVERRIDE_HELP,
        epilog=f"Default output directory: ${OUTPUT_DIR_ENV} or the current directory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario", description=OVERRIDE_HELP)
    p.add_argument("--config", required=True)
    _add_overrides(p)
    p.add_argument("--csv", help="trace output path")
    p.add_argument("--svg", help="optional total_queue plot")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run policy x seed grid", description=OVERRIDE_HELP)
    p.add_argument("--config", required=True)
    p.add_argument("--policies", default="bp,sbp,abp")
    p.add_argument("--seeds", default="0")
    _add_overrides(p, with_policy=False)
    p.add_argument("--outdir")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="plot CSV traces to SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--metric", default="total_queue")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("validate", help="oracle feasibility check", description=OVERRIDE_HELP)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
