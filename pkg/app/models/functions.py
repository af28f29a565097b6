from enum import Enum
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class FunctionKind(str, Enum):
    MULTIPLICATIVE = "multiplicative"
    POINTWISE = "pointwise"


class ArithmeticFunction(BaseModel):
    """
    Nonnegative function on the positive integers.
    A multiplicative function is given by its prime-power rule (p, e) -> f(p^e);
    a pointwise one by an evaluator n -> f(n).
    """
    model_config = ConfigDict(frozen=True)

    name: str = Field(description="Label used in reports and CSV metadata.",
                      examples=["tau"])
    kind: FunctionKind = Field(default=FunctionKind.MULTIPLICATIVE)
    rule: Optional[Callable[[int, int], float]] = Field(
        default=None, description="Prime-power rule, required for multiplicative kind.")
    evaluator: Optional[Callable[[int], float]] = Field(
        default=None, description="Pointwise evaluator, required for pointwise kind.")

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == FunctionKind.MULTIPLICATIVE and self.rule is None:
            raise ValueError(
                f"multiplicative function '{self.name}' needs a prime-power rule")
        if self.kind == FunctionKind.POINTWISE and self.evaluator is None:
            raise ValueError(
                f"pointwise function '{self.name}' needs an evaluator")
        return self

    @property
    def is_multiplicative(self) -> bool:
        return self.kind == FunctionKind.MULTIPLICATIVE

    def at_prime_power(self, p: int, e: int) -> float:
        if self.is_multiplicative:
            return float(self.rule(p, e))
        return float(self.evaluator(p**e))

    def at_primes(self, primes: np.ndarray) -> np.ndarray:
        return np.fromiter((self.at_prime_power(int(p), 1) for p in primes),
                           dtype=np.float64, count=len(primes))


class DensityParams(BaseModel):
    """Constants (kappa, lambda1, lambda2, B, K) of a density function."""
    model_config = ConfigDict(frozen=True)

    kappa: float = Field(default=1.0, gt=0, description="Sieve dimension.")
    lambda1: float = Field(default=1.0, gt=0)
    lambda2: float = Field(default=0.0, ge=0,
                           description="May be 0 for h(p^e) = p^-e.")
    B: float = Field(default=1.0, gt=0,
                     description="Primes p <= B are exempt from the product condition.")
    K: float = Field(default=2.0, gt=0)


class DensityFunction(BaseModel):
    """Multiplicative h >= 0 with its class parameters."""
    model_config = ConfigDict(frozen=True)

    name: str = Field(examples=["reciprocal"])
    rule: Callable[[int, int], float] = Field(
        description="Prime-power rule (p, e) -> h(p^e).")
    params: DensityParams = Field(default_factory=DensityParams)

    def at_prime_power(self, p: int, e: int) -> float:
        return float(self.rule(p, e))

    def at_primes(self, primes: np.ndarray) -> np.ndarray:
        return np.fromiter((float(self.rule(int(p), 1)) for p in primes),
                           dtype=np.float64, count=len(primes))

    def as_function(self) -> ArithmeticFunction:
        return ArithmeticFunction(name=self.name, rule=self.rule)


class GrowthParams(BaseModel):
    """Constants (A, epsilon, C) of the growth class."""
    model_config = ConfigDict(frozen=True)

    A: float = Field(default=2.0, ge=1)
    epsilon: float = Field(default=1.0, gt=0)
    C: float = Field(default=2.0, gt=0)


Witness = Tuple[Union[int, float], ...]


class ConditionResult(BaseModel):
    """Outcome of one membership condition over a finite checked range."""
    condition: str = Field(examples=["product"])
    passed: bool
    slack: float = Field(
        description="Worst observed value of lhs / bound; pass means slack <= 1.")
    witness: Optional[Witness] = Field(
        default=None, description="Point attaining the worst slack.")
    violations: int = 0
    witnesses: List[Witness] = Field(
        default_factory=list, description="First violating points in scan order.")
    checked_range: str = Field(examples=["p <= 10000, e <= 8"])


class ClassReport(BaseModel):
    subject: str
    conditions: List[ConditionResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def worst_ratio(self) -> float:
        return max((c.slack for c in self.conditions), default=0.0)

    @property
    def witness(self) -> Optional[Witness]:
        worst = max(self.conditions, key=lambda c: c.slack, default=None)
        return worst.witness if worst else None

    def condition(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.condition == name:
                return c
        raise KeyError(name)
