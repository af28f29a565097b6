import argparse
from pathlib import Path

from loguru import logger

from app.cli.common import output_path, run_metadata
from app.core.config import settings
from app.models.experiment import ExperimentConfig
from app.models.sieve import SieveSide
from app.services.functions import constant_over_p_density
from app.services.sieve import build_weights, lower_sieve_estimate, main_term_accuracy, verify_properties
from app.utils.csv_writer import sibling, write_csv

NAME = "sieve-verify"
WEIGHTS_HEADER = ["m", "lambda", "side"]
CHECKS_HEADER = ["side", "property", "violations", "checked", "witness"]


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        NAME, parents=[common], help="Build beta-sieve weights, dump them and verify their defining properties")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    section = config.sieve
    sides = [SieveSide.UPPER, SieveSide.LOWER] if section.side == "both" else [SieveSide(section.side)]
    density = constant_over_p_density(section.f_c)

    weight_rows, check_rows = [], []
    for side in sides:
        # 1. Weights and their properties
        weights = build_weights(section.kappa, section.y, section.z, side, beta=section.beta)
        weight_rows.extend((m, lam, side) for m, lam in sorted(weights.weights.items()))
        check = verify_properties(weights, section.n_limit)
        check_rows.extend((side, r.name, r.violations, r.checked, r.witness) for r in check.results)
        if not check.passed:
            logger.warning(f"{side.value} weights violate: "
                           f"{', '.join(r.name for r in check.results if r.violations)}")

        # 2. Accuracy against prod (1 - f(p))
        accuracy = main_term_accuracy(weights, density)
        logger.info(f"{side.value}: sigma={accuracy.sigma!r}, relative error {accuracy.relative_error!r}")
        if side == SieveSide.LOWER:
            estimate = lower_sieve_estimate(weights, density, section.K)
            logger.info(f"lower estimate: sum={estimate.sum!r}, floor={estimate.floor!r}, holds={estimate.holds}")

    metadata = run_metadata(config, NAME, ["sieve"])
    metadata["sieve.max_weights"] = settings.max_sieve_weights
    path = output_path(config, args.output, NAME)
    write_csv(sibling(path, "checks"), CHECKS_HEADER, check_rows, metadata)
    return write_csv(path, WEIGHTS_HEADER, weight_rows, metadata)
