import argparse
from pathlib import Path

from loguru import logger

from app.cli.common import output_path, run_metadata
from app.core.dependencies import build_family, build_function, prime_tables_for
from app.models.experiment import ExperimentConfig
from app.services.bounds import BoundsService, case_ii_diagnostic, compute_constants
from app.utils.csv_writer import sibling, write_csv

NAME = "cases"
HEADER = ["T", "M", "Z", "Z_cls", "case", "count", "weight", "contribution", "share", "envelope", "lhs_flat"]
CASE_II_HEADER = ["T", "q", "m_q", "n_q", "f_q", "h_q_fq"]


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        NAME, parents=[common], help="Per-case contributions of the flat/rough decomposition over the T grid")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    tables = prime_tables_for(config)
    fam = build_family(config)
    f = build_function(config.function)
    service = BoundsService(tables)

    rows, case_ii_rows = [], []
    for T in config.grid.T:
        table = service.case_table(fam, f, T)
        rows.extend((T, table.M, table.Z, table.Z_cls, c.case, c.count, c.weight, c.contribution,
                     c.share, c.envelope, table.lhs_flat) for c in table.cases)

        # Case (ii) exponents at the classification scale
        consts, _ = compute_constants(fam.model, fam.model.density_at(T).params, table.M)
        diagnostic = case_ii_diagnostic(fam.model, consts.model_copy(update={"Z": table.Z_cls}), table.M, T)
        case_ii_rows.extend((T, r.q, r.m_q, r.n_q, r.f_q, r.h_q_fq) for r in diagnostic.rows)
        logger.info(f"T={T!r}: sum of h(q^f_q) over {len(diagnostic.rows)} primes = {diagnostic.total!r}")

    metadata = run_metadata(config, NAME, ["family", "function", "density", "model", "grid"], tables.limit)
    path = output_path(config, args.output, NAME)
    write_csv(sibling(path, "case_ii"), CASE_II_HEADER, case_ii_rows, metadata)
    return write_csv(path, HEADER, rows, metadata)
