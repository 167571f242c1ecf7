"""Compare SAI against the exhaustive optimum on small instances."""
import argparse
import sys

import structlog

from app.commands import add_common_arguments, config_from_args
from app.harness import compare_with_oracle, summarize_oracle_rows
from app.output import open_output, write_rows
from app.schemas import OracleComparisonRow

logger = structlog.get_logger(__name__)


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    rows = compare_with_oracle(config, config.sweep.seeds, tau_cap=args.tau_cap or config.sweep.oracle_tau_cap)
    with open_output(args.out) as stream:
        write_rows(rows, stream, config.output.format, OracleComparisonRow)
    summary = summarize_oracle_rows(rows)
    logger.info("oracle_comparison_summary", **summary)
    print(
        "summary: "
        + " ".join(f"{key}={value}" for key, value in summary.items())
        + f" total={len(rows)}",
        file=sys.stderr,
    )
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("oracle", help="SAI versus brute-force optimum, one row per seed")
    add_common_arguments(parser)
    parser.add_argument("--tau-cap", type=int, help="largest update count enumerated per learner")
    parser.set_defaults(handler=run)
