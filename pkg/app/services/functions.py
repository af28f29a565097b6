import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.exceptions import ConfigError, PreconditionError
from app.models.functions import (
    ArithmeticFunction, ClassReport, ConditionResult, DensityFunction,
    DensityParams, FunctionKind, GrowthParams, Witness,
)
from app.services.arith import (
    PrimeTables, big_omega_table, factor_pairs, multiplicative_table,
)

MAX_WITNESSES = 10
RATIO_TOLERANCE = 1e-12
VALUE_SAMPLE = 1000


# ==========================================================================
# BUILT-IN FUNCTIONS
# ==========================================================================

def constant_one() -> ArithmeticFunction:
    return ArithmeticFunction(name="one", rule=lambda p, e: 1.0)


def divisor_tau() -> ArithmeticFunction:
    return ArithmeticFunction(name="tau", rule=lambda p, e: float(e + 1))


def mobius_squared() -> ArithmeticFunction:
    return ArithmeticFunction(name="mu_squared", rule=lambda p, e: 1.0 if e == 1 else 0.0)


def power_of_big_omega(base: float = 2.0) -> ArithmeticFunction:
    """n -> base^Omega(n)."""
    return ArithmeticFunction(name=f"pow_big_omega_{base:g}", rule=lambda p, e: float(base) ** e)


def smooth_density() -> ArithmeticFunction:
    """F(p^e) = min{1/p, p^(1-e)}."""
    return ArithmeticFunction(name="smooth_density", rule=lambda p, e: min(1.0 / p, float(p) ** (1 - e)))


def reciprocal_power() -> ArithmeticFunction:
    """F(p^e) = p^-e, i.e. F(n) = 1/n."""
    return ArithmeticFunction(name="reciprocal", rule=lambda p, e: float(p) ** (-e))


def zero_beyond_one() -> ArithmeticFunction:
    return ArithmeticFunction(name="zero", rule=lambda p, e: 0.0)


def prime_scaled(base: ArithmeticFunction, factor: float) -> ArithmeticFunction:
    """Multiplies the values at primes by `factor`, higher powers unchanged."""
    def rule(p: int, e: int) -> float:
        value = base.at_prime_power(p, e)
        return value * factor if e == 1 else value
    return ArithmeticFunction(name=f"{base.name}_x{factor:g}_at_primes", rule=rule)


def exponent_table(values: Sequence[float], default: float = 0.0, name: str = "table") -> ArithmeticFunction:
    """f(p^e) = values[e - 1] for every prime p; `default` past the table."""
    frozen = tuple(float(v) for v in values)

    def rule(p: int, e: int) -> float:
        return frozen[e - 1] if e <= len(frozen) else default
    return ArithmeticFunction(name=name, rule=rule)


def reciprocal_density(params: Optional[DensityParams] = None) -> DensityFunction:
    """h(p^e) = p^-e, so h(d) = 1/d."""
    return DensityFunction(name="reciprocal", rule=lambda p, e: float(p) ** (-e),
                           params=params or DensityParams())


def constant_over_p_density(c: float, params: Optional[DensityParams] = None) -> DensityFunction:
    """h(p^e) = c/p for every e."""
    return DensityFunction(name=f"const_{c:g}_over_p", rule=lambda p, e: c / p,
                           params=params or DensityParams())


BUILTIN_FUNCTIONS: Dict[str, Callable[..., ArithmeticFunction]] = {
    "one": constant_one,
    "tau": divisor_tau,
    "mu_squared": mobius_squared,
    "pow_big_omega": power_of_big_omega,
    "smooth_density": smooth_density,
    "reciprocal": reciprocal_power,
    "zero": zero_beyond_one,
}


def builtin_function(name: str, **params) -> ArithmeticFunction:
    factory = BUILTIN_FUNCTIONS.get(name)
    if factory is None:
        raise ConfigError(
            f"unknown function '{name}' (known: {', '.join(sorted(BUILTIN_FUNCTIONS))})",
            location="function.name")
    return factory(**params)


# ==========================================================================
# EVALUATION
# ==========================================================================

def evaluate(f: ArithmeticFunction, n: int, tables: PrimeTables) -> float:
    if f.kind == FunctionKind.POINTWISE:
        return float(f.evaluator(n))
    value = 1.0
    for p, e in factor_pairs(n, tables):
        value *= f.rule(p, e)
    return float(value)


def value_table(f: ArithmeticFunction, n_max: int, tables: PrimeTables) -> np.ndarray:
    """f(0..n_max) as a float array, f(0) = 0."""
    if f.is_multiplicative:
        return multiplicative_table(f.rule, n_max, tables)
    values = np.empty(n_max + 1, dtype=np.float64)
    values[0] = 0.0
    values[1:] = np.fromiter((f.evaluator(n) for n in range(1, n_max + 1)),
                             dtype=np.float64, count=n_max)
    return values


def coprime_pair_scan(values: np.ndarray, bound: np.ndarray, limit: int) -> Tuple[float, Optional[Witness], int, List[Witness]]:
    """
    Scans f(mn) <= f(m) * bound(n) over coprime (m, n), mn <= limit.
    Returns worst ratio, its pair, violation count and the first violating pairs.
    """
    worst = 0.0
    worst_pair: Optional[Witness] = None
    violations = 0
    witnesses: List[Witness] = []
    for m in range(1, limit + 1):
        n = np.arange(1, limit // m + 1, dtype=np.int64)
        n = n[np.gcd(n, m) == 1]
        lhs = values[m * n]
        rhs = values[m] * bound[n]
        positive = rhs > 0
        ratio = np.where(positive, lhs / np.where(positive, rhs, 1.0),
                         np.where(lhs > 0, np.inf, 0.0))
        i = int(np.argmax(ratio))
        if ratio[i] > worst:
            worst = float(ratio[i])
            worst_pair = (m, int(n[i]))
        bad = np.nonzero(ratio > 1.0 + RATIO_TOLERANCE)[0]
        violations += len(bad)
        for j in bad[:MAX_WITNESSES - len(witnesses)].tolist():
            witnesses.append((m, int(n[j])))
    return worst, worst_pair, violations, witnesses


def default_grid(B: float, prime_limit: int) -> List[Tuple[float, float]]:
    """(w, z) pairs from {3, 10, 100, ..., prime_limit} with B < w < z."""
    points = [3]
    step = 10
    while step < prime_limit:
        points.append(step)
        step *= 10
    points.append(prime_limit)
    points = sorted(set(p for p in points if B < p <= prime_limit))
    return [(w, z) for i, w in enumerate(points) for z in points[i + 1:]]


class FunctionClassService:
    """Finite-range membership checks for the density and growth classes."""

    def __init__(self, tables: PrimeTables):
        self.tables = tables

    # ==========================================================================
    # DENSITY CLASS
    # ==========================================================================

    def _product_condition(self, h: DensityFunction, prime_limit: int,
                           grid: Sequence[Tuple[float, float]]) -> ConditionResult:
        params = h.params
        primes = self.tables.primes_in(0, prime_limit)
        values = h.at_primes(primes)
        worst, worst_pair = 0.0, None
        violations, witnesses = 0, []
        for w, z in grid:
            lo = np.searchsorted(primes, w, side="left")
            hi = np.searchsorted(primes, z, side="left")
            block = values[lo:hi]
            if np.any(block >= 1.0):
                slack = math.inf
            else:
                inverse = math.exp(-float(np.log1p(-block).sum()))
                envelope = (math.log(z) / math.log(w)) ** params.kappa * (1.0 + params.K / math.log(w))
                slack = inverse / envelope
            if slack > worst or worst_pair is None:
                worst, worst_pair = slack, (w, z)
            if slack > 1.0:
                violations += 1
                if len(witnesses) < MAX_WITNESSES:
                    witnesses.append((w, z))
        return ConditionResult(
            condition="product", passed=violations == 0, slack=worst,
            witness=worst_pair, violations=violations, witnesses=witnesses,
            checked_range=f"{len(grid)} (w, z) pairs, z <= {prime_limit}",
        )

    def _prime_power_condition(self, name: str, h: DensityFunction, primes: np.ndarray,
                               exponent_limit: int,
                               bound: Callable[[np.ndarray, int], np.ndarray],
                               checked_range: str) -> ConditionResult:
        worst, worst_pair = 0.0, None
        violations, witnesses = 0, []
        # exponent-major scan order
        for e in range(1, exponent_limit + 1):
            values = np.fromiter((h.at_prime_power(int(p), e) for p in primes),
                                 dtype=np.float64, count=len(primes))
            slack = values / bound(primes, e)
            if len(slack) == 0:
                continue
            i = int(np.argmax(slack))
            if slack[i] > worst or worst_pair is None:
                worst, worst_pair = float(slack[i]), (int(primes[i]), e)
            bad = np.nonzero(slack > 1.0 + RATIO_TOLERANCE)[0]
            violations += len(bad)
            for j in bad[:MAX_WITNESSES - len(witnesses)].tolist():
                witnesses.append((int(primes[j]), e))
        return ConditionResult(
            condition=name, passed=violations == 0, slack=worst,
            witness=worst_pair, violations=violations, witnesses=witnesses,
            checked_range=checked_range,
        )

    def check_density_class(self, h: DensityFunction, prime_limit: int,
                            exponent_limit: int,
                            grid: Optional[Sequence[Tuple[float, float]]] = None) -> ClassReport:
        """
        Checks the three density-class conditions over p <= prime_limit,
        e <= exponent_limit and the (w, z) grid. Failures are report entries.
        """
        params = h.params
        self.tables.require(prime_limit, "prime_limit")
        grid = list(grid) if grid is not None else default_grid(params.B, prime_limit)
        for w, z in grid:
            if not (params.B < w < z <= prime_limit):
                raise PreconditionError(
                    f"grid pair (w={w}, z={z}) violates B < w < z <= prime_limit "
                    f"(B={params.B}, prime_limit={prime_limit})."
                )
        logger.info(f"Density class check of '{h.name}': {len(grid)} grid pairs, "
                    f"p <= {prime_limit}, e <= {exponent_limit}")

        primes = self.tables.primes_in(0, prime_limit)
        large = primes[primes > params.B]
        scope = f"p <= {prime_limit}, e <= {exponent_limit}"
        conditions = [
            self._product_condition(h, prime_limit, grid),
            self._prime_power_condition(
                "local", h, large, exponent_limit,
                lambda ps, e: params.B / ps.astype(np.float64),
                f"B < {scope}",
            ),
            self._prime_power_condition(
                "decay", h, primes, exponent_limit,
                lambda ps, e: np.exp((-e * params.lambda1 + params.lambda2) * np.log(ps)),
                scope,
            ),
        ]
        return ClassReport(subject=h.name, conditions=conditions)

    # ==========================================================================
    # GROWTH CLASS
    # ==========================================================================

    def _values_condition(self, f: ArithmeticFunction, values: np.ndarray,
                          sample_limit: int) -> ConditionResult:
        """
        f(n) finite and >= 0 for n <= sample_limit; for the multiplicative kind also
        f(1) = 1, f(mn) = f(m) f(n) on coprime pairs and table = composition over factorize.
        """
        witnesses: List[Witness] = []
        violations = 0
        worst = 0.0

        bad = np.nonzero(~np.isfinite(values[1:]) | (values[1:] < 0))[0] + 1
        violations += len(bad)
        witnesses.extend((int(n),) for n in bad[:MAX_WITNESSES].tolist())
        if len(bad):
            worst = math.inf

        if f.is_multiplicative and not len(bad):
            if values[1] != 1.0:
                violations += 1
                witnesses.append((1,))
                worst = math.inf
            for m in range(2, math.isqrt(sample_limit) + 1):
                n = np.arange(m + 1, sample_limit // m + 1, dtype=np.int64)
                n = n[np.gcd(n, m) == 1]
                expected = values[m] * values[n]
                mismatch = np.abs(values[m * n] - expected) / np.maximum(np.abs(expected), 1.0)
                if len(mismatch):
                    worst = max(worst, float(mismatch.max()))
                for j in np.nonzero(mismatch > 1e-9)[0].tolist():
                    violations += 1
                    if len(witnesses) < MAX_WITNESSES:
                        witnesses.append((m, int(n[j])))
            for k in range(1, min(sample_limit, VALUE_SAMPLE) + 1):
                direct = evaluate(f, k, self.tables)
                if abs(direct - values[k]) > 1e-9 * max(abs(direct), 1.0):
                    violations += 1
                    worst = max(worst, abs(direct - values[k]) / max(abs(direct), 1.0))
                    if len(witnesses) < MAX_WITNESSES:
                        witnesses.append((k,))

        return ConditionResult(
            condition="values", passed=violations == 0, slack=worst,
            witness=witnesses[0] if witnesses else None,
            violations=violations, witnesses=witnesses,
            checked_range=f"n <= {sample_limit}",
        )

    def check_growth_class(self, f: ArithmeticFunction, params: GrowthParams,
                           sample_limit: int) -> ClassReport:
        """
        Exhaustive check of f(mn) <= f(m) min{A^Omega(n), C n^eps} for coprime mn <= limit,
        preceded by the value sanity condition.
        """
        if sample_limit < 2:
            raise PreconditionError(f"sample_limit must be >= 2, got {sample_limit}.")
        values = value_table(f, sample_limit, self.tables)
        sanity = self._values_condition(f, values, sample_limit)
        if not sanity.passed:
            logger.warning(f"'{f.name}' fails the value checks at {sanity.witness}")
        omega = big_omega_table(sample_limit, self.tables)
        n = np.arange(sample_limit + 1, dtype=np.float64)
        bound = np.minimum(params.A ** omega.astype(np.float64), params.C * n ** params.epsilon)
        worst, pair, violations, witnesses = coprime_pair_scan(values, bound, sample_limit)
        logger.debug(f"Growth check of '{f.name}': worst ratio {worst!r} at {pair}")
        return ClassReport(subject=f.name, conditions=[sanity, ConditionResult(
            condition="growth", passed=violations == 0, slack=worst, witness=pair,
            violations=violations, witnesses=witnesses,
            checked_range=f"coprime m*n <= {sample_limit}",
        )])

    def check_lower_positivity(self, f: ArithmeticFunction, L: int, m_limit: int) -> float:
        """min f(m) over m <= m_limit with Omega(m) <= L."""
        if m_limit < 2:
            raise PreconditionError(f"m_limit must be >= 2, got {m_limit}.")
        values = value_table(f, m_limit, self.tables)
        omega = big_omega_table(m_limit, self.tables)
        admissible = values[1:][omega[1:] <= L]
        return float(admissible.min())
