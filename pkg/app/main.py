import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from app.cli import SUBCOMMANDS
from app.core.config import settings
from app.core.dependencies import load_config
from app.core.exceptions import ConfigError, EquidistError
from app.core.logging import setup_logging


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="Experiment TOML file")
    common.add_argument("--output", type=str, default=None, help="CSV path, overrides [experiment] output")
    common.add_argument("--workers", type=int, default=None,
                        help=f"Threads for grid points (default {settings.workers})")
    common.add_argument("--log-level", type=str, default=None)

    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Desk-scale checks of mean values of arithmetic functions over equidistributed families")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    for module in SUBCOMMANDS:
        module.register(subparsers, common)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = load_config(args.config)
        path = args.handler(args, config)
    except ConfigError as exc:
        logger.error(f"Config error: {exc.detail}")
        return exc.exit_code
    except EquidistError as exc:
        logger.error(exc.detail)
        return exc.exit_code
    except ValidationError as exc:
        logger.error(f"Invalid parameters: {exc.errors()[0]['msg']}")
        return ConfigError.exit_code
    except Exception:
        logger.exception(f"Unexpected failure in '{args.subcommand}'")
        return 1

    logger.info(f"{args.subcommand} finished: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
