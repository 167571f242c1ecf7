import argparse

import structlog

from app import allocator
from app.commands import add_common_arguments, config_from_args
from app.core.exceptions import AppException
from app.harness import generate_scenario, run_scheme
from app.output import open_output, write_jsonlines, write_key_values
from app.schemas import OutputFormat, Scheme, SolveSummary

logger = structlog.get_logger(__name__)


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    problem = generate_scenario(config).problem
    allocation = run_scheme(problem, Scheme(args.scheme))
    relaxed = {}
    try:
        cont = allocator.relaxed_solve(problem)
        relaxed = {
            "relaxed_z": cont.slack_z,
            "relaxed_common_tau": cont.common_tau,
            "relaxed_taus": cont.taus,
            "relaxed_batches": cont.batches,
        }
    except AppException as exc:
        # Baselines can be feasible where the relaxed problem is not.
        logger.info("relaxed_solve_unavailable", error=f"{type(exc).__name__}: {exc.detail}")
    summary = SolveSummary(
        scheme=allocation.scheme,
        num_learners=problem.num_learners,
        cycle_budget_s=problem.cycle_budget_s,
        taus=allocation.taus,
        batches=allocation.batches,
        times=allocation.times,
        participating=allocation.participating,
        max_staleness=allocation.report.max_staleness,
        avg_staleness=allocation.report.avg_staleness,
        **relaxed,
    )
    with open_output(args.out) as stream:
        if config.output.format == OutputFormat.JSONLINES:
            write_jsonlines([summary], stream)
        else:
            write_key_values(summary, stream)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("solve", help="allocate one instance")
    add_common_arguments(parser)
    parser.add_argument(
        "--scheme",
        choices=[scheme.value for scheme in Scheme],
        default=Scheme.HA_ASYNC.value,
        help="allocation scheme (default: HA-async)",
    )
    parser.set_defaults(handler=run)
