"""Command-line interface.

    floquet-sep <subcommand> --config <path> [--out <dir>] [--seed <u64>]

Subcommands select one experiment each; ``all`` runs every experiment.
Prerequisites are inserted automatically (bundle before separation
before uniqueness/membership).  Exit status: 0 on success, 2 on
configuration errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import EXPERIMENTS, parse_config
from .errors import ConfigError, NumericalError
from .runner import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floquet-sep",
        description="Principal bundle and exponential separation experiments "
        "for nonautonomous reaction-diffusion flows.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*EXPERIMENTS, "all"):
        p = sub.add_parser(
            name,
            help="run every experiment" if name == "all" else f"run the {name} experiment",
        )
        p.add_argument("--config", required=True, help="scenario config file (TOML subset)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG

    run = list(EXPERIMENTS) if args.command == "all" else [args.command]
    try:
        manifest = run_scenario(config, out_dir=args.out, seed=args.seed, run=run)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for entry in manifest.outputs:
        print(f"wrote {entry['path']}  sha256={entry['sha256'][:16]}...")
    print(f"status: {manifest.status} (seed={manifest.seed})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
