"""Command-line entry point: ``backscatter-lab run`` and ``backscatter-lab validate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import LabError
from .scenario import parse_scenario, run_scenario


def build_parser():
    parser = argparse.ArgumentParser(
        prog="backscatter-lab",
        description="Run backscattering experiments described by JSON scenario files.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write its artifacts")
    run.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    run.add_argument("--out", required=True, type=Path, help="output directory")
    run.add_argument("--threads", type=int, default=None, help="worker threads for the solver")
    run.add_argument("--seed", type=int, default=None,
                     help="seed for the random-point property checks")
    val = sub.add_parser("validate", help="parse a scenario and print it with defaults filled")
    val.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.scenario.read_text())
        if args.command == "validate":
            print(json.dumps(sc.to_dict(), indent=2, sort_keys=True, default=float))
            return 0
        status, summary = run_scenario(sc, args.out, seed=args.seed, threads=args.threads)
    except (LabError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for c in summary["checks"]:
        mark = "PASS" if c["passed"] else "FAIL"
        print(f"{mark} criterion {c['criterion']:>2} {c['name']}: {c['value']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
