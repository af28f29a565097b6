import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SieveSide(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


class SieveWeights(BaseModel):
    """
    Sparse lambda table of the combinatorial beta-sieve: only nonzero weights
    are stored, keyed by squarefree m | P(z) = prod_{p<z} p.
    """
    model_config = ConfigDict(frozen=True)

    y: float = Field(gt=1, description="Support cutoff: lambda_m = 0 for m >= y.")
    z: float = Field(gt=1, description="Sifting limit.")
    kappa: float = Field(gt=0, description="Sieve dimension.")
    side: SieveSide
    beta: float = Field(gt=0, description="Truncation parameter of the construction.")
    weights: Dict[int, int] = Field(description="m -> lambda_m, nonzero entries only.")

    @model_validator(mode="after")
    def _check_unit(self):
        if self.weights.get(1) != 1:
            raise ValueError("lambda_1 must equal 1")
        return self

    @property
    def sigma(self) -> float:
        """sigma = log y / log z."""
        return math.log(self.y) / math.log(self.z)

    def __getitem__(self, m: int) -> int:
        return self.weights.get(m, 0)


class AccuracyResult(BaseModel):
    sum: float = Field(description="sum_m lambda_m f(m).")
    reference: float = Field(description="prod_{p<z} (1 - f(p)).")
    relative_error: float
    sigma: float


class LowerEstimate(BaseModel):
    sum: float
    floor: float = Field(description="(1 - e^(1 + 9 kappa - s) K^10) * reference.")
    holds: bool


class PropertyResult(BaseModel):
    name: str = Field(examples=["sandwich"])
    violations: int
    checked: int
    witness: Optional[int] = None


class SieveCheck(BaseModel):
    side: SieveSide
    n_limit: int
    results: List[PropertyResult]

    @property
    def passed(self) -> bool:
        return all(r.violations == 0 for r in self.results)


class SiftedSum(BaseModel):
    """Sifted congruence sum next to its explicit upper envelope."""
    exact: float
    bound: float
    gamma: float = Field(description="max{1/xi4, 1/(theta - xi3), 1/xi}.")
    sifting_limit: float

    @property
    def ratio(self) -> float:
        return self.exact / self.bound if self.bound > 0 else math.inf
