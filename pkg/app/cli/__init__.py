"""
Command-line entry point.

Every subcommand registers its own parser and handler; ``main`` maps the
toolkit's exceptions to exit codes (0 ok, 1 failed check or diverged
training, 2 bad input or configuration).
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.cli.commands import COMMANDS
from app.cli.common import EXIT_FAILED, EXIT_INPUT
from app.core.config import settings
from app.core.errors import NonFiniteLossError, QuadMetricError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.PROJECT_NAME,
        description="Hierarchical quadruplet metric learning toolkit",
    )
    parser.add_argument("--log-level", default=None, help=f"Logging level (default {settings.LOG_LEVEL})")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=(args.log_level or settings.LOG_LEVEL).upper(), format=settings.LOG_FORMAT)

    try:
        return args.handler(args)
    except NonFiniteLossError as e:
        logger.error("training diverged: %s", e)
        return EXIT_FAILED
    except ValidationError as e:
        logger.error("invalid configuration: %s", e)
        return EXIT_INPUT
    except (QuadMetricError, OSError, UnicodeDecodeError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
