from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class CaseLabel(str, Enum):
    I = "i"        # P-(b) >= Z^eta3
    II = "ii"      # P-(b) < Z^eta3, d <= Z^(1 - eta2)
    III = "iii"    # P-(b) <= (log Z) log log Z, d > Z^(1 - eta2)
    IV = "iv"      # (log Z) log log Z < P-(b) < Z^eta3, d > Z^(1 - eta2)


CASE_ORDER = [CaseLabel.I, CaseLabel.II, CaseLabel.III, CaseLabel.IV]


class DecompositionConstants(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta1: float = Field(gt=0, description="(1/alpha) min{xi/20, theta/2, 1/2}.")
    eta2: float = Field(gt=0)
    eta3: float = Field(gt=0, description="min{lambda1 eta2 / (2 (1 + lambda1 + lambda2)), 1/2}.")
    Z: float = Field(gt=0, description="M^(alpha eta1).")


class LowerBoundConstants(BaseModel):
    model_config = ConfigDict(frozen=True)

    v: float = Field(gt=0)
    v0: float = Field(gt=0, description="min{v/2, theta/2}.")
    z: float = Field(gt=0, description="M^v.")


class FlatRoughSplit(BaseModel):
    """c = d b with d the longest prefix of prime powers (by increasing prime) that stays <= Z."""
    model_config = ConfigDict(frozen=True)

    d: int = Field(ge=1, description="Flat part.")
    b: int = Field(ge=1, description="Rough part.")
    rough_prime: Optional[int] = Field(
        default=None, description="P-(b); None when b = 1.")

    @model_validator(mode="after")
    def _check_rough_prime(self):
        if (self.b == 1) != (self.rough_prime is None):
            raise ValueError("rough_prime must be set exactly when b > 1")
        return self


class BoundReport(BaseModel):
    """Both sides of the upper and lower estimates at one T."""
    T: float
    M: float
    Z: float
    Z_cls: float = Field(description="max(Z, 16), the value the cases are classified with.")
    lhs: float = Field(ge=0)
    rhs_upper: float
    ratio_upper: float
    rhs_lower: Optional[float] = Field(default=None, description="Absent when the lower product degenerates.")
    ratio_lower: Optional[float] = None
    case_contributions: Dict[CaseLabel, float]


class CaseSummary(BaseModel):
    case: CaseLabel
    count: int
    weight: float = Field(description="Sum of chi_T(a) over the case.")
    contribution: float = Field(description="Sum of chi_T(a) f(c_a) over the case.")
    share: float
    envelope: float = Field(description="Theoretical error envelope of the case, constants dropped.")


class CaseTable(BaseModel):
    T: float
    M: float
    Z: float
    Z_cls: float
    lhs: float
    lhs_flat: float = Field(description="Part of lhs with c_a flat part <= M^v0.")
    cases: List[CaseSummary]


class CaseIIRow(BaseModel):
    q: int
    m_q: int = Field(description="Least m with q^m > Z^eta2.")
    n_q: int = Field(description="Largest n with q^n <= M^theta, 0 if none.")
    f_q: int
    h_q_fq: float


class CaseIIDiagnostic(BaseModel):
    rows: List[CaseIIRow]
    total: float = Field(description="Sum of h(q^f_q) over q < Z^eta3.")
