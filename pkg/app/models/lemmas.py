import math
from typing import Dict, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class EnvelopeParams(BaseModel):
    """Constants shared by the smooth-number and Euler-product envelopes."""
    model_config = ConfigDict(frozen=True)

    c0: float = Field(default=1.0, gt=0, description="F(p^e) <= c0 / p.")
    c1: float = Field(default=1.0, gt=0, description="F(p^e) <= p^(c1 - e c2).")
    c2: float = Field(default=1.0, gt=0)
    c3: float = Field(default=1.0, ge=0, description="F(p^e) <= c3 / p^2 for e >= 2.")
    C: float = Field(default=2.0, gt=0, description="Majorant base: H(p^e) <= C^e.")
    C_prime: float = Field(default=2.0, gt=0, description="Majorant scale: H(p^e) <= C' p^(e eps).")
    beta0: float = Field(default=1.0, gt=0)
    varpi: float = Field(default=1.0, gt=0, description="Decay rate of the smooth tail.")
    Upsilon: float = Field(default=1e3, gt=0, description="Tail start.")
    Psi: float = Field(default=1e2, gt=1, description="Smoothness bound: P+(a) < Psi.")
    nu1: float = Field(default=1.0, gt=0, description="Exponent of 1/eps in the series ratio.")

    @model_validator(mode="after")
    def _check_varpi(self):
        ceiling = min(self.c2 / 2.0 * math.log(self.Psi), self.beta0)
        if self.varpi > ceiling:
            raise ValueError(
                f"varpi <= min{{c2/2 log Psi, beta0}} violated: varpi={self.varpi}, bound={ceiling!r}"
            )
        return self


class LemmaReport(BaseModel):
    """Exact left side of an estimate next to its explicit envelope."""
    lemma: str = Field(examples=["smooth-tail"])
    lhs: float = Field(ge=0)
    rhs_envelope: float = Field(ge=0)
    implied_constant: float = Field(
        ge=0, description="lhs / rhs_envelope; 0 when both vanish.")
    truncation_error: float = Field(
        default=0.0, ge=0, description="Bound on what the a <= a_max cut leaves out of lhs.")
    parameters: Dict[str, Union[float, int, str]] = Field(default_factory=dict)
    extras: Dict[str, float] = Field(default_factory=dict)
