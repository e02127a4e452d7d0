"""Command-line interface.

    dronesim run <scenario> [--seed N] [--csv PATH] [--json PATH]
    dronesim list-presets
    dronesim validate <scenario>
    dronesim sweep <scenario> --param KEY --values V1,V2,...

<scenario> is a file path or a shipped preset name. Exit codes: 0
success, 1 usage error, 2 scenario error, 3 run aborted on an internal
invariant.
"""

from __future__ import annotations

import argparse
import sys

from .runner import export, run
from .scenario import ScenarioError, apply_override, list_presets, load_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCENARIO = 2
EXIT_ABORTED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dronesim",
        description="Discrete-event simulation of a Simplex-protected "
                    "quadcopter under DoS attacks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--csv", default=None, metavar="PATH")
    p_run.add_argument("--json", default=None, metavar="PATH")

    sub.add_parser("list-presets", help="list shipped scenario presets")

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario")

    p_sweep = sub.add_parser("sweep", help="run a scenario once per parameter value")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--param", required=True, metavar="KEY")
    p_sweep.add_argument("--values", required=True, metavar="V1,V2,...")
    p_sweep.add_argument("--seed", type=int, default=None)
    return parser


def _deviation(log) -> float:
    sx, sy = log.trajectory[0][1], log.trajectory[0][2]
    worst = 0.0
    for row in log.trajectory:
        d = ((row[1] - sx) ** 2 + (row[2] - sy) ** 2) ** 0.5
        worst = max(worst, d)
    return worst


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    log = run(scenario)
    if args.csv:
        export(log, "csv", args.csv)
    if args.json:
        export(log, "json", args.json)
    print(f"{scenario.name}: {log.outcome}", end="")
    if log.switch_time_s is not None:
        print(f", switched at {log.switch_time_s:.3f} s", end="")
    if log.crash_time_s is not None:
        print(f", crashed at {log.crash_time_s:.3f} s", end="")
    print(f", max horizontal deviation {_deviation(log):.3f} m")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    values = [v for v in args.values.split(",") if v != ""]
    if not values:
        raise ScenarioError("--values is empty")
    rows = []
    for value in values:
        scenario = load_scenario(args.scenario)
        if args.seed is not None:
            scenario.seed = args.seed
        apply_override(scenario, args.param, value)
        scenario.validate()
        log = run(scenario)
        rows.append((value, log.outcome,
                     "-" if log.switch_time_s is None else f"{log.switch_time_s:.3f}",
                     f"{_deviation(log):.3f}"))
    width = max(len(args.param), max(len(r[0]) for r in rows))
    print(f"{args.param:<{width}}  outcome           switch_s  max_dev_m")
    for value, outcome, switch, dev in rows:
        print(f"{value:<{width}}  {outcome:<16}  {switch:>8}  {dev:>9}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        if args.command == "list-presets":
            for name in list_presets():
                print(name)
            return EXIT_OK
        if args.command == "validate":
            load_scenario(args.scenario)
            print(f"{args.scenario}: ok")
            return EXIT_OK
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return EXIT_USAGE
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except Exception as e:  # internal invariant violation
        print(f"run aborted: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
