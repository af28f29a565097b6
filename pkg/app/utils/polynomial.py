import re
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

VARIABLES = ("x", "y", "z")
_TERM = re.compile(r"([+-]?)([^+-]+)")
_FACTOR = re.compile(r"([xyz])(?:\^(\d+))?")
INT64_HEADROOM = 2**62


class IntegerPolynomial(BaseModel):
    """
    Integer polynomial in up to three variables x, y, z.
    Stored as (coefficient, exponent tuple) terms with nonzero coefficients.
    """
    model_config = ConfigDict(frozen=True)

    dimension: int = Field(ge=1, le=3)
    terms: Tuple[Tuple[int, Tuple[int, ...]], ...] = Field(
        description="(coefficient, exponents) pairs.",
        examples=[((1, (2,)), (1, (0,)))]
    )
    source: str = Field(default="", description="Expression the polynomial was parsed from.")

    @model_validator(mode="after")
    def _check_terms(self):
        for coef, exps in self.terms:
            if len(exps) != self.dimension:
                raise ValueError("exponent tuple length must equal the dimension")
            if coef == 0:
                raise ValueError("terms must have nonzero coefficients")
        return self

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(exps) for _, exps in self.terms), default=0)

    def magnitude_bound(self, radius: int) -> int:
        """Upper bound for |Q(x)| with max |x_i| <= radius."""
        r = max(int(radius), 1)
        return sum(abs(c) * r ** sum(exps) for c, exps in self.terms)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Exact int64 values at the rows of `points` (shape (N, dimension))."""
        result = np.zeros(len(points), dtype=np.int64)
        for coef, exps in self.terms:
            term = np.full(len(points), coef, dtype=np.int64)
            for i, e in enumerate(exps):
                if e:
                    term *= points[:, i] ** e
            result += term
        return result

    def evaluate_mod(self, points: np.ndarray, modulus: int) -> np.ndarray:
        """Values reduced mod `modulus`, reducing after every multiplication."""
        result = np.zeros(len(points), dtype=np.int64)
        residues = points % modulus
        for coef, exps in self.terms:
            term = np.full(len(points), coef % modulus, dtype=np.int64)
            for i, e in enumerate(exps):
                for _ in range(e):
                    term = (term * residues[:, i]) % modulus
            result = (result + term) % modulus
        return result


def parse_polynomial(expression: str, dimension: int) -> IntegerPolynomial:
    """
    Parses sums of monomials such as "x^2 + 1", "x^2 + y^2" or "3*x*y - 2*z^3".
    """
    expr = expression.replace(" ", "")
    if not expr:
        raise ValueError("empty polynomial expression")
    allowed = VARIABLES[:dimension]
    collected: Dict[Tuple[int, ...], int] = {}
    consumed = 0
    for match in _TERM.finditer(expr):
        if match.start() != consumed:
            raise ValueError(f"cannot parse '{expression}' near position {consumed}")
        consumed = match.end()
        sign = -1 if match.group(1) == "-" else 1
        coef = sign
        exps = [0] * dimension
        for factor in match.group(2).split("*"):
            if factor.isdigit():
                coef *= int(factor)
                continue
            fm = _FACTOR.fullmatch(factor)
            if fm is None or fm.group(1) not in allowed:
                raise ValueError(
                    f"bad factor '{factor}' in '{expression}' (variables: {', '.join(allowed)})")
            exps[allowed.index(fm.group(1))] += int(fm.group(2) or 1)
        key = tuple(exps)
        collected[key] = collected.get(key, 0) + coef
    if consumed != len(expr):
        raise ValueError(f"cannot parse '{expression}' near position {consumed}")
    terms = tuple((c, e) for e, c in sorted(collected.items(), reverse=True) if c != 0)
    return IntegerPolynomial(dimension=dimension, terms=terms, source=expression)
