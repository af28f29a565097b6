import argparse
import inspect
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from loguru import logger
from pydantic import ValidationError

from app.cli.common import output_path, run_metadata
from app.core.dependencies import a_max_for, build_density, build_named_function, prime_tables_for
from app.core.exceptions import ConfigError
from app.models.experiment import ExperimentConfig, LemmaSection
from app.models.lemmas import EnvelopeParams, LemmaReport
from app.services.lemmas import LEMMA_IDS, LemmaLabService
from app.utils.csv_writer import write_csv

NAME = "lemma"
REPORT_HEADER = ["lemma", "parameter", "value", "lhs", "rhs_envelope", "implied_constant", "truncation_error"]
MAJORANT_HEADER = ["condition", "passed", "slack", "witness", "checked_range"]
ARGUMENTS = ["x", "z", "A", "c", "beta", "T", "V", "epsilon", "a", "alpha2", "alpha3", "gamma", "a_max"]


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        NAME, parents=[common], help="Evaluate one smooth-number or Euler-product estimate, optionally over a sweep")
    parser.add_argument("lemma_id", nargs="?", default=None,
                        help=f"Overrides [lemma] id; one of {', '.join(LEMMA_IDS)}")
    parser.set_defaults(handler=run)


def envelope_params(section: LemmaSection) -> EnvelopeParams:
    values = {name: getattr(section, name) for name in EnvelopeParams.model_fields
              if getattr(section, name) is not None}
    try:
        return EnvelopeParams(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or "params"
        raise ConfigError(error["msg"], location=f"lemma.{field}")


def _rows(reports: List[LemmaReport], parameter: Optional[str]) -> Tuple[List[str], List[tuple]]:
    extras = sorted({key for report in reports for key in report.extras})
    rows = [(r.lemma, parameter, r.parameters.get(parameter) if parameter else None,
             r.lhs, r.rhs_envelope, r.implied_constant, r.truncation_error,
             *(r.extras.get(key) for key in extras))
            for r in reports]
    return REPORT_HEADER + extras, rows


def run(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    section = config.lemma
    lemma_id = args.lemma_id or section.id
    if lemma_id not in LEMMA_IDS:
        raise ConfigError(f"unknown lemma '{lemma_id}' (known: {', '.join(LEMMA_IDS)})", location="lemma.id")

    tables = prime_tables_for(config)
    service = LemmaLabService(tables)
    params = envelope_params(section)
    F = build_named_function(section.F, "lemma.F")
    G = build_named_function(section.G, "lemma.G")
    metadata = run_metadata(config, NAME, ["lemma"], tables.limit, uses_a_max=True)
    metadata["lemma.id"] = lemma_id
    path = output_path(config, args.output, NAME)

    # 1. The majorant condition is a class check, not an estimate
    if lemma_id == "majorant":
        report = service.majorant_check(G, params, section.sample_limit or config.limits.sample_limit,
                                        epsilon=section.epsilon)
        rows = [(c.condition, c.passed, c.slack, c.witness, c.checked_range) for c in report.conditions]
        return write_csv(path, MAJORANT_HEADER, rows, metadata)

    # 2. Evaluator arguments from the [lemma] section
    method = service.evaluator(lemma_id)
    accepted = inspect.signature(method).parameters
    kwargs: Dict[str, Any] = {"F": F, "G": G, "params": params}
    if "g" in accepted:
        kwargs = {"g": build_density(config)}
    kwargs = {k: v for k, v in kwargs.items() if k in accepted}
    for name in ARGUMENTS:
        value = getattr(section, name)
        if name == "c" and lemma_id != "euler-product":
            continue  # prime-weight-inflation takes c as a per-prime function
        if value is not None and name in accepted:
            kwargs[name] = value
    if "a_max" in accepted and "a_max" not in kwargs:
        kwargs["a_max"] = a_max_for(config)

    parameter = section.parameter
    if parameter is not None and parameter not in accepted and parameter not in EnvelopeParams.model_fields:
        raise ConfigError(f"'{lemma_id}' has no parameter '{parameter}'", location="lemma.parameter")
    missing = [name for name, p in accepted.items()
               if p.default is inspect.Parameter.empty and name not in kwargs and name != parameter]
    if missing:
        raise ConfigError(f"'{lemma_id}' needs {', '.join(missing)}", location=f"lemma.{missing[0]}")

    # 3. Single evaluation or sweep
    if parameter is None:
        reports = [method(**kwargs)]
    else:
        kwargs.pop(parameter, None)
        reports = service.sweep(lemma_id, parameter, section.values, workers=args.workers, **kwargs)
    logger.info(f"{lemma_id}: implied constants {[r.implied_constant for r in reports]}")

    header, rows = _rows(reports, parameter)
    return write_csv(path, header, rows, metadata)
