from enum import Enum
from typing import Callable, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.functions import DensityFunction


class MChoice(str, Enum):
    TOTAL = "total"      # M(T) = C_1(T), total weight
    T = "T"              # M(T) = T
    SCALED = "scaled"    # M(T) = m_scale * T^m_power


class EquidistModel(BaseModel):
    """
    Model (h, M, theta, xi, alpha, B~) a family is claimed to be equidistributed
    against: C_d(T) = h(d) M(T) + error for d <= M^theta.
    """
    model_config = ConfigDict(frozen=True)

    h: DensityFunction
    m_choice: MChoice = Field(default=MChoice.TOTAL)
    m_scale: float = Field(default=1.0, gt=0)
    m_power: float = Field(default=1.0, gt=0)
    theta: float = Field(default=0.5, gt=0, description="Level of distribution.")
    xi: float = Field(default=0.9, gt=0, description="Error exponent: error is O(M^(1 - xi)).")
    alpha: float = Field(default=1.0, gt=0, description="Growth exponent: c_a <= B~ M^alpha.")
    B_tilde: float = Field(default=1.0, gt=0)
    h_override: Optional[Callable[[float], DensityFunction]] = Field(
        default=None, description="Per-T density hook; no built-in family sets it.")

    @model_validator(mode="after")
    def _check_exponents(self):
        if max(self.theta, self.xi) >= 1:
            raise ValueError(
                f"equidistribution needs max{{theta, xi}} < 1, got theta={self.theta}, xi={self.xi}"
            )
        return self

    def density_at(self, T: float) -> DensityFunction:
        return self.h_override(T) if self.h_override is not None else self.h


class DiagnosticsRow(BaseModel):
    d: int
    C_d: float = Field(description="Congruence sum C_d(T).")
    h_d_M: float = Field(description="Main term h(d) M(T).")
    residual: float
    score: float = Field(description="|residual| over the error envelope.")


class DiagnosticsTable(BaseModel):
    family: str
    T: float
    M: float
    rows: List[DiagnosticsRow]

    @property
    def max_score(self) -> float:
        return max((r.score for r in self.rows), default=0.0)
