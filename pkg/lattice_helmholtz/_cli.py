"""
Command line: ``python -m lattice_helmholtz <subcommand> <config.json>``.

Exit status 0 on success, 2 for configuration problems (the diagnostic
names the offending field), 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from pydantic import ValidationError

from ._config import SCHEMA_VERSION, SUBCOMMANDS, load_config
from ._errors import ConfigurationError, NumericalError
from ._experiments import run

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

LOG_LEVEL_ENV = "LATTICE_HELMHOLTZ_LOG_LEVEL"


def configure_logging() -> None:
    level = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lattice_helmholtz",
        description="Discrete Helmholtz forward and inverse problems on Z^d.",
        epilog=(
            f"subcommands: {', '.join(SUBCOMMANDS)}\n"
            f"config schema version: {SCHEMA_VERSION}\n"
            f"log level: ${LOG_LEVEL_ENV} (default WARNING)"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="experiment to run")
    parser.add_argument("config", type=Path, help="JSON experiment config")
    return parser


def _describe(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "config"
        lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.subcommand)
        result = run(cfg)
    except ValidationError as exc:
        print(f"configuration error:\n{_describe(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"configuration error: {args.config}: invalid JSON ({exc})", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{result.subcommand}: wrote {len(result.artifacts)} artifacts to {result.output_dir}")
    return EXIT_OK
