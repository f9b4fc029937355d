"""
Command-line entry point.

Usage:
    python run.py run <scenario> --out <dir> [--repeats N]
    python run.py calibrate <scenario> --ref <curve.csv> --budget N --out <dir>
    python run.py validate <scenario> --probes <spec> --field <field.csv> --out <dir>
"""
import argparse
import logging
import sys
from typing import List, Optional

from cli.commands import LOG_FORMAT, cmd_calibrate, cmd_run, cmd_validate
from config import get_settings


def setup_logging(level: Optional[str] = None):
    settings = get_settings()
    handlers = [logging.StreamHandler()]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format=LOG_FORMAT,
        handlers=handlers,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Headless PBD brain-tissue catheter insertion simulator")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default: SIM_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run a scenario's insertion experiment")
    p_run.add_argument("scenario", help="Scenario file")
    p_run.add_argument("--out", required=True, help="Output directory")
    p_run.add_argument("--repeats", type=int, default=None, help="Override protocol.repeats")

    p_cal = sub.add_parser("calibrate", help="Fit cluster parameters to a reference curve")
    p_cal.add_argument("scenario", help="Scenario file")
    p_cal.add_argument("--ref", required=True, help="Reference curve CSV (depth_m, displacement_m)")
    p_cal.add_argument("--budget", type=int, required=True, help="Maximum number of evaluations")
    p_cal.add_argument("--out", required=True, help="Output directory")

    p_val = sub.add_parser("validate", help="Compare hole-perimeter probes with a reference field")
    p_val.add_argument("scenario", help="Scenario file")
    p_val.add_argument("--probes", required=True, help="Probe spec file")
    p_val.add_argument("--field", required=True, help="Reference field CSV (x, y, z, dx, dy, dz)")
    p_val.add_argument("--out", required=True, help="Output directory")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    if args.command == "run":
        return cmd_run(args.scenario, args.out, args.repeats)
    if args.command == "calibrate":
        return cmd_calibrate(args.scenario, args.ref, args.budget, args.out)
    return cmd_validate(args.scenario, args.probes, args.field, args.out)


if __name__ == "__main__":
    sys.exit(main())
