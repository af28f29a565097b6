import argparse
from pathlib import Path

from loguru import logger

from app.cli.common import output_path, run_metadata
from app.core.dependencies import build_density, build_function, prime_tables_for
from app.models.experiment import ExperimentConfig
from app.models.functions import GrowthParams
from app.services.functions import FunctionClassService
from app.utils.csv_writer import write_csv

NAME = "class-check"
HEADER = ["condition", "passed", "slack", "witness", "checked_range"]


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        NAME, parents=[common], help="Density-class conditions of h and growth class of f over finite ranges")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    tables = prime_tables_for(config)
    service = FunctionClassService(tables)
    h = build_density(config)
    f = build_function(config.function)
    limits, check = config.limits, config.check

    reports = [
        service.check_density_class(h, limits.density_prime_limit, limits.exponent_limit),
        service.check_growth_class(f, GrowthParams(A=check.A, epsilon=check.epsilon, C=check.C),
                                   limits.sample_limit),
    ]
    rows = [(c.condition, c.passed, c.slack, c.witness, c.checked_range)
            for report in reports for c in report.conditions]
    if check.L is not None:
        minimum = service.check_lower_positivity(f, check.L, check.m_limit)
        rows.append(("lower_positivity", minimum > 0, minimum, None,
                     f"Omega(m) <= {check.L}, m <= {check.m_limit}"))

    failed = [row[0] for row in rows if not row[1]]
    if failed:
        logger.warning(f"Class check failed conditions: {', '.join(failed)}")
    metadata = run_metadata(config, NAME, ["density", "function", "limits", "check"], tables.limit)
    return write_csv(output_path(config, args.output, NAME), HEADER, rows, metadata)
