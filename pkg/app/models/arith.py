import math
from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class FactoredInteger(BaseModel):
    """
    A positive integer together with its canonical prime-power decomposition.
    Conventions: P+(1) = 1 and P-(1) = +inf.
    """
    model_config = ConfigDict(frozen=True)

    value: int = Field(
        ge=1,
        lt=2**63,
        description="The integer itself (64-bit range).",
        examples=[12]
    )
    factors: Tuple[Tuple[int, int], ...] = Field(
        default=(),
        description="(prime, exponent) pairs, primes strictly increasing, exponents >= 1.",
        examples=[((2, 2), (3, 1))]
    )

    @model_validator(mode="after")
    def _check_canonical(self):
        product = 1
        previous = 1
        for p, e in self.factors:
            if p <= previous:
                raise ValueError("primes must be strictly increasing")
            if e < 1:
                raise ValueError(f"exponent of {p} must be >= 1")
            product *= p**e
            previous = p
        if product != self.value:
            raise ValueError(
                f"factors multiply to {product}, not {self.value}")
        return self

    @property
    def big_omega(self) -> int:
        """Omega(n): prime factors counted with multiplicity."""
        return sum(e for _, e in self.factors)

    @property
    def small_omega(self) -> int:
        return len(self.factors)

    @property
    def largest_prime(self) -> int:
        return self.factors[-1][0] if self.factors else 1

    @property
    def smallest_prime(self) -> float:
        return float(self.factors[0][0]) if self.factors else math.inf

    @property
    def is_squarefree(self) -> bool:
        return all(e == 1 for _, e in self.factors)

    def valuation(self, p: int) -> int:
        for q, e in self.factors:
            if q == p:
                return e
        return 0

    def as_dict(self) -> Dict[int, int]:
        return dict(self.factors)
