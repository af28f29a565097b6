import tomllib
from functools import lru_cache
from pathlib import Path
from typing import Optional

from loguru import logger
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.models.experiment import DensityRule, ExperimentConfig, FamilyKind, FunctionSection
from app.models.families import EquidistModel
from app.models.functions import ArithmeticFunction, DensityFunction, DensityParams
from app.services.arith import PrimeTables
from app.services.families import (
    WeightedFamily, make_identity_family, make_polynomial_box_family,
    make_variety_family, residue_density,
)
from app.services.functions import (
    builtin_function, constant_over_p_density, exponent_table, reciprocal_density,
)
from app.utils.polynomial import IntegerPolynomial, parse_polynomial


def load_config(path: Path) -> ExperimentConfig:
    """Reads and validates an experiment file; every failure becomes a ConfigError with its location."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("file not found", location=str(path))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc), location=str(path))

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        error = exc.errors()[0]
        location = ".".join(str(part) for part in error["loc"]) or str(path)
        raise ConfigError(error["msg"], location=location)


@lru_cache(maxsize=4)
def get_prime_tables(limit: int) -> PrimeTables:
    """Shared read-only tables, one per limit."""
    return PrimeTables(limit)


def prime_tables_for(config: ExperimentConfig) -> PrimeTables:
    return get_prime_tables(config.limits.prime_limit or settings.prime_limit)


def a_max_for(config: ExperimentConfig) -> int:
    return config.limits.a_max or settings.a_max


# ==========================================================================
# BUILDERS
# ==========================================================================

def _polynomial(expression: str, dimension: int, location: str) -> IntegerPolynomial:
    try:
        return parse_polynomial(expression, dimension)
    except ValueError as exc:
        raise ConfigError(str(exc), location=location)


def build_function(section: FunctionSection) -> ArithmeticFunction:
    if section.prime_powers is not None:
        return exponent_table(section.prime_powers, default=section.default, name="table")
    params = {"base": section.base} if section.base is not None else {}
    try:
        return builtin_function(section.name, **params)
    except TypeError:
        raise ConfigError(f"'{section.name}' takes no base", location="function.base")


def build_named_function(name: str, location: str) -> ArithmeticFunction:
    try:
        return builtin_function(name)
    except ConfigError as exc:
        raise ConfigError(exc.detail.split(": ", 1)[-1], location=location)


def build_density(config: ExperimentConfig) -> DensityFunction:
    section = config.density
    params = DensityParams(kappa=section.kappa, lambda1=section.lambda1,
                           lambda2=section.lambda2, B=section.B, K=section.K)
    if section.rule == DensityRule.RECIPROCAL:
        return reciprocal_density(params)
    if section.rule == DensityRule.CONST_OVER_P:
        return constant_over_p_density(section.c, params)

    family = config.family
    if family.name == FamilyKind.IDENTITY or family.polynomial is None:
        raise ConfigError("residue densities need a family polynomial", location="density.rule")
    Q = _polynomial(family.polynomial, family.dimension, "family.polynomial")
    return DensityFunction(name=f"residue[{Q.source}]", rule=residue_density(Q), params=params)


def build_model(config: ExperimentConfig, h: Optional[DensityFunction] = None) -> EquidistModel:
    section = config.model
    return EquidistModel(
        h=h or build_density(config), m_choice=section.m_choice,
        m_scale=section.m_scale, m_power=section.m_power,
        theta=section.theta, xi=section.xi, alpha=section.alpha, B_tilde=section.B_tilde)


def build_family(config: ExperimentConfig) -> WeightedFamily:
    section = config.family
    model = build_model(config)
    grid = config.grid.T
    if section.name == FamilyKind.IDENTITY:
        family = make_identity_family(grid, model)
    elif section.name == FamilyKind.BOX:
        Q = _polynomial(section.polynomial, section.dimension, "family.polynomial")
        family = make_polynomial_box_family(
            Q, section.dimension, list(zip(section.box_lower, section.box_upper)), model, T_grid=grid)
    else:
        Q1 = _polynomial(section.constraint, section.dimension, "family.constraint")
        Q2 = _polynomial(section.polynomial, section.dimension, "family.polynomial")
        family = make_variety_family(Q1, Q2, section.dimension, model, grid)
    logger.debug(f"Built {family!r} with h='{model.h.name}', M choice {model.m_choice.value}")
    return family
