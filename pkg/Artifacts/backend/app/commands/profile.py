import argparse

from app.commands import add_common_arguments, config_from_args
from app.harness import profile_table
from app.output import open_output, write_rows
from app.schemas import ProfileRow


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    rows = profile_table(config)
    with open_output(args.out) as stream:
        write_rows(rows, stream, config.output.format, ProfileRow)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("profile", help="per-learner time coefficients at the HA allocation")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
