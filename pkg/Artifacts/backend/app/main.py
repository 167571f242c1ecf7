"""
Command-line entry point for the allocator.

Builds the argument parser from the subcommand modules, configures logging and
maps exceptions to exit codes: 0 on success, the exception's `exit_code` for
application errors (1 for bad input or config, 2 for infeasible instances) and
1 for anything unexpected.
"""
import argparse
import sys
from typing import List, NoReturn, Optional

import structlog

from app.commands import oracle, profile, simulate, solve, sweep
from app.core.config import settings
from app.core.exceptions import AppException, ConfigError
from app.core.logging import configure_logging

logger = structlog.get_logger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors become ConfigError (exit 1) instead of argparse's exit 2."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="asyncmel", description=settings.DESCRIPTION.strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    parser.add_argument("--log-level", help="override MEL_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    for command in (solve, sweep, oracle, simulate, profile):
        command.register(subparsers)
    return parser


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    configure_logging(settings.LOG_LEVEL, settings.LOG_JSON)
    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            configure_logging(args.log_level, settings.LOG_JSON)
        structlog.contextvars.bind_contextvars(command=args.command)
        return args.handler(args)
    except AppException as exc:
        logger.warning("Application exception caught", exit_code=exc.exit_code, detail=exc.detail)
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.error("Unhandled exception", exc_info=True)
        print(f"error: unexpected failure: {exc}", file=sys.stderr)
        return 1
    finally:
        structlog.contextvars.clear_contextvars()


def main() -> NoReturn:
    sys.exit(cli_main())
