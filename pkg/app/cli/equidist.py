import argparse
from pathlib import Path

from loguru import logger

from app.cli.common import output_path, run_metadata
from app.core.dependencies import build_family, prime_tables_for
from app.models.experiment import ExperimentConfig
from app.services.families import FamilyService
from app.utils.csv_writer import write_csv

NAME = "equidist"
HEADER = ["T", "M", "d", "C_d", "h_d_M", "residual", "score"]


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        NAME, parents=[common], help="Congruence-sum residuals of a family against its model, per T and d")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    tables = prime_tables_for(config)
    service = FamilyService(tables)
    fam = build_family(config)

    report = service.check_family(fam, config.grid.T)
    if not report.passed:
        logger.warning(f"{fam.name} fails family conditions: worst ratio {report.worst_ratio!r} "
                       f"at {report.witness}")

    rows = []
    for T in config.grid.T:
        table = service.equidist_diagnostics(fam, T, config.limits.d_limit)
        rows.extend((T, table.M, r.d, r.C_d, r.h_d_M, r.residual, r.score) for r in table.rows)

    metadata = run_metadata(config, NAME, ["family", "density", "model", "grid", "limits"], tables.limit)
    return write_csv(output_path(config, args.output, NAME), HEADER, rows, metadata)
