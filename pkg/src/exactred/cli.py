"""Command line: validate scenarios, run the reduction pipelines, integrate named fields."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import report as rp
from .catalog import ANCHORS, anchor, strip_prefix
from .flows import FlowSpec, integrate
from .pipeline import FIELD_NAMES, named_field, run_pipeline
from .scenario import BUILTINS, ScenarioError, load_scenario, parse_point

EXIT_PASS, EXIT_FAIL, EXIT_NOTHING = 0, 1, 2


def _load(source: str):
    try:
        return load_scenario(source)
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return None


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_validate(args) -> int:
    sc = _load(args.scenario)
    if sc is None:
        return EXIT_FAIL
    print(f"scenario {sc.name}: valid")
    for name, chart in sc.charts.items():
        print(f"  chart {name}: dim {chart.dim} ({', '.join(chart.coords)})")
    parts = [label for label, data in (("A", sc.pipeline_a), ("B", sc.pipeline_b)) if data]
    print(f"  pipelines: {', '.join(parts) if parts else 'none'}"
          f"{'; equivalence map declared' if sc.kappa is not None else ''}")
    return EXIT_PASS


def cmd_reduce(args) -> int:
    sc = _load(args.scenario)
    if sc is None:
        return EXIT_FAIL
    report = run_pipeline(sc, args.pipeline, args.seed)
    text = rp.to_json_text(report) if args.report == "json" else rp.to_human(report)
    _write(text, args.out)
    return report.exit_code


def _parse_start(chart, text: str):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if items and all("=" in s for s in items):
        spec = dict(s.split("=", 1) for s in items)
        spec = {k.strip(): v.strip() for k, v in spec.items()}
    else:
        spec = items
    return parse_point(chart, spec, "--start")


def cmd_flow(args) -> int:
    sc = _load(args.scenario)
    if sc is None:
        return EXIT_FAIL
    try:
        field = named_field(sc, args.field)
        start = _parse_start(field.chart, args.start)
        spec = FlowSpec(field, args.t_end, args.step)
        traj = integrate(spec, start, field.chart)
    except (ScenarioError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(traj.to_records(), args.out)
    if traj.event is not None:
        print(f"flow halted at t={traj.times[-1]:.17g}: {traj.event}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


def cmd_report(args) -> int:
    if args.list:
        for key in ANCHORS:
            print(f"{key}: {ANCHORS[key]}")
        return EXIT_PASS
    if args.explain is None:
        print("error: report needs --explain <check_id> or --list", file=sys.stderr)
        return EXIT_NOTHING
    try:
        text = anchor(args.explain)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_FAIL
    print(f"{strip_prefix(args.explain)}: {text}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exactred",
        description="Cross-verify restrict-then-reduce and reduce-then-restrict for exact "
                    "symplectic systems with symmetry.")
    sub = parser.add_subparsers(dest="command", required=True)
    scen_help = f"scenario file or built-in name ({', '.join(BUILTINS)})"

    p = sub.add_parser("validate", help="load and check a scenario without computing")
    p.add_argument("scenario", help=scen_help)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reduce", help="run a pipeline and print the verification report")
    p.add_argument("scenario", help=scen_help)
    p.add_argument("--pipeline", default="both",
                   choices=["A", "B", "both", "restrict-then-reduce", "reduce-then-restrict"])
    p.add_argument("--report", default="human", choices=["human", "json"])
    p.add_argument("--seed", type=int, default=None,
                   help="sampling seed (default: $MMW_SEED, then the scenario seed, then 42)")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("flow", help="integrate a named field with fixed-step RK4")
    p.add_argument("scenario", help=scen_help)
    p.add_argument("--field", required=True, choices=FIELD_NAMES)
    p.add_argument("--start", required=True,
                   help="start point as comma-separated values or coord=value pairs")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--out", default=None, help="write trajectory records here instead of stdout")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("report", help="explain what a check id certifies")
    p.add_argument("--explain", metavar="CHECK_ID")
    p.add_argument("--list", action="store_true", help="list every check id")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
