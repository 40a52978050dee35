"""momplan Command Line Interface."""

from __future__ import annotations

import argparse
import json
import sys

from src.config import (
    APP_NAME,
    APP_VERSION,
    EXIT_ERROR,
    EXIT_SUCCESS,
    LQR_DT,
    LQR_HORIZON,
    LQR_Q,
    LQR_R_FORCE,
    LQR_R_TORQUE,
)
from src.logger import set_verbosity
from src.scenario import WARM_STARTS

from src.cli.gains import cmd_gains
from src.cli.pipeline import cmd_pipeline
from src.cli.plan import cmd_plan
from src.cli.simulate import cmd_simulate


class CLI:
    """momplan CLI handler."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.json_output = getattr(args, "json", False)
        self.quiet = getattr(args, "quiet", False)
        self.verbose = getattr(args, "verbose", False)
        set_verbosity(quiet=self.quiet, verbose=self.verbose)

    def output(self, data: dict | list | str, message: str = "") -> None:
        """Output data in appropriate format."""
        if self.quiet and not self.json_output:
            return
        if self.json_output:
            print(json.dumps(data, indent=2, default=str))
        else:
            print(message if message else data)

    def error(self, message: str, code: int = EXIT_ERROR, violations: list[str] | None = None) -> int:
        """Output error and return code."""
        if self.json_output:
            payload = {"error": message}
            if violations is not None:
                payload["violations"] = violations
            print(json.dumps(payload), file=sys.stderr)
        else:
            print(f"Error: {message}", file=sys.stderr)
            for v in violations or []:
                print(f"  - {v}", file=sys.stderr)
        return code


def _add_gain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--horizon", type=float, help=f"Gain window length in seconds (default {LQR_HORIZON})")
    p.add_argument("--dt", type=float, help=f"Control step in seconds (default {LQR_DT})")
    p.add_argument("--stride", type=float, help="Window recompute stride in seconds (default: dt)")
    p.add_argument("--q", type=float, help=f"State error weight (default {LQR_Q})")
    p.add_argument("--r-force", type=float, help=f"Force weight (default {LQR_R_FORCE})")
    p.add_argument("--r-torque", type=float, help=f"Torque weight (default {LQR_R_TORQUE})")
    p.add_argument("--workers", type=int, help="Threads for window synthesis (default MOMPLAN_THREADS)")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--feedback", choices=["on", "off"], default="on", help="Closed loop or open loop")
    p.add_argument("--disturbances", help="YAML file with a list of disturbances")
    p.add_argument("--com-offset", help="Initial CoM offset as x,y,z in meters")
    p.add_argument("--sim-dt", type=float, help="Integration step in seconds")
    p.add_argument("--divergence-bound", type=float, help="Abort when the state error (momenta divided by mass) exceeds this bound")


def build_parser() -> argparse.ArgumentParser:
    """Build argument parser with all subcommands."""
    parser = argparse.ArgumentParser(prog=APP_NAME, description="momplan - Momentum trajectory planner")
    parser.add_argument("--version", "-v", action="version", version=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument("--json", action="store_true", help="Output as JSON")
    parser.add_argument("--quiet", "-q", action="store_true", help="Suppress non-essential output")
    parser.add_argument("--verbose", action="store_true", help="Verbose output")
    subparsers = parser.add_subparsers(dest="command", help="Commands")

    # plan
    plan_parser = subparsers.add_parser("plan", help="Seed and optimize a momentum plan")
    plan_parser.add_argument("scenario", help="Scenario YAML file")
    plan_parser.add_argument("--out", help="Output root (default MOMPLAN_OUTPUT_DIR)")
    plan_parser.add_argument("--seed", type=int, default=0, help="Run seed, recorded in the manifest")
    plan_parser.add_argument("--max-passes", type=int, help="Maximum seed passes")
    plan_parser.add_argument("--warm-start", choices=WARM_STARTS, help="Initial point for the full solve")

    # gains
    gains_parser = subparsers.add_parser("gains", help="Synthesize sliding LQR gains for a plan")
    gains_parser.add_argument("plan", help="Plan file or directory")
    gains_parser.add_argument("--out", help="Run directory (default: the plan's run directory)")
    _add_gain_flags(gains_parser)

    # simulate
    sim_parser = subparsers.add_parser("simulate", help="Run the reduced model under the gains")
    sim_parser.add_argument("plan", help="Plan file or directory")
    sim_parser.add_argument("gains", help="Gain file or directory")
    sim_parser.add_argument("--out", help="Run directory (default: the plan's run directory)")
    _add_sim_flags(sim_parser)

    # pipeline
    pipe_parser = subparsers.add_parser("pipeline", help="Plan, gains and simulation in one run")
    pipe_parser.add_argument("scenario", help="Scenario YAML file")
    pipe_parser.add_argument("--out", help="Output root (default MOMPLAN_OUTPUT_DIR)")
    pipe_parser.add_argument("--seed", type=int, default=0, help="Run seed, recorded in the manifest")
    pipe_parser.add_argument("--max-passes", type=int, help="Maximum seed passes")
    pipe_parser.add_argument("--warm-start", choices=WARM_STARTS, help="Initial point for the full solve")
    pipe_parser.add_argument("--skip-simulate", action="store_true", help="Stop after gain synthesis")
    _add_gain_flags(pipe_parser)
    _add_sim_flags(pipe_parser)

    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_SUCCESS

    cli = CLI(args)

    if args.command == "plan":
        return cmd_plan(cli)
    elif args.command == "gains":
        return cmd_gains(cli)
    elif args.command == "simulate":
        return cmd_simulate(cli)
    elif args.command == "pipeline":
        return cmd_pipeline(cli)

    return EXIT_SUCCESS


if __name__ == "__main__":
    sys.exit(main())
