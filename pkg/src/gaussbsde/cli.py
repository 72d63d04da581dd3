"""Command-line entry point.

    gaussbsde run <config.json> [--out DIR] [--seed N] [--quiet]
    gaussbsde validate <config.json>

Exit codes: 0 all asserted checks pass, 1 configuration or runtime error,
2 at least one check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import load_config
from .errors import ConfigInvalid, GaussBsdeError
from .experiments import run_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussbsde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the configured experiment(s)")
    run_p.add_argument("config")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--quiet", action="store_true", help="suppress console output")
    val_p = sub.add_parser("validate", help="schema-check a config and exit")
    val_p.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        print(f"ok: kind={cfg.kind} digest={cfg.digest}")
        return 0

    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_dir = args.out or cfg.out_dir or "gaussbsde_out"
    try:
        _, all_passed = run_config(cfg, out_dir, quiet=args.quiet)
    except GaussBsdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    return 0 if all_passed else 2


if __name__ == "__main__":
    sys.exit(main())
