import argparse
from pathlib import Path

from app.cli.common import output_path, run_metadata
from app.core.dependencies import build_family, build_function, prime_tables_for
from app.models.bounds import CASE_ORDER
from app.models.experiment import ExperimentConfig
from app.models.functions import GrowthParams
from app.services.bounds import POSITIVITY_OMEGA, BoundsService
from app.utils.csv_writer import write_csv

NAME = "bound"
HEADER = ["T", "M", "lhs", "rhs_upper", "ratio_upper", "rhs_lower", "ratio_lower",
          "case_i", "case_ii", "case_iii", "case_iv"]


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        NAME, parents=[common], help="Both sides of the upper and lower mean-value estimates over the T grid")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    tables = prime_tables_for(config)
    fam = build_family(config)
    f = build_function(config.function)
    check = config.check
    growth = GrowthParams(A=check.A, epsilon=check.epsilon, C=check.C)
    L = check.L if check.L is not None else POSITIVITY_OMEGA

    reports = BoundsService(tables).bound_scan(
        fam, f, config.grid.T, workers=args.workers, growth=growth,
        sample_limit=config.limits.sample_limit, L=L, m_limit=check.m_limit)
    rows = [(r.T, r.M, r.lhs, r.rhs_upper, r.ratio_upper, r.rhs_lower, r.ratio_lower,
             *(r.case_contributions[label] for label in CASE_ORDER))
            for r in reports]

    metadata = run_metadata(config, NAME, ["family", "function", "density", "model", "grid", "check"],
                            tables.limit)
    metadata["limits.sample_limit"] = config.limits.sample_limit
    metadata["check.L"] = L
    return write_csv(output_path(config, args.output, NAME), HEADER, rows, metadata)
