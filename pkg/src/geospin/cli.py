"""Command-line entry point: ``geospin <command> --config FILE``."""

import argparse
import os
import sys
import traceback
from pathlib import Path

from .config import validate_config
from .errors import ConfigError, DomainError, FormatError, GeospinError, ValidationError
from .pipeline import COMMANDS, OUT_ENV, run

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DOMAIN = 4


def build_parser():
    p = argparse.ArgumentParser(
        prog="geospin",
        description="Simulate a geoelectron spin-velocity field along an orbit and "
                    "the comagnetometer response to it.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and [output] dir)")
    p.add_argument("--threads", type=int, help="worker threads for the field integration")
    p.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    return p


def _origin(exc):
    """Module where the exception was raised, e.g. 'field'."""
    tb = traceback.extract_tb(exc.__traceback__)
    return Path(tb[-1].filename).stem if tb else "geospin"


def exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (OSError, FormatError)):
        return EXIT_IO
    if isinstance(exc, (DomainError, ValidationError)):
        return EXIT_DOMAIN
    return EXIT_OTHER


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg = validate_config(args.config)
        written = run(args.command, cfg, out=args.out, threads=args.threads, seed=args.seed)
    except (GeospinError, OSError) as exc:
        print(f"geospin {args.command}: error in {_origin(exc)}: {exc}", file=sys.stderr)
        return exit_code(exc)
    out = args.out or os.environ.get(OUT_ENV) or cfg["output"]["dir"]
    print(f"geospin {args.command}: wrote {len(written)} files to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
