from enum import Enum
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.families import MChoice


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FamilyKind(str, Enum):
    IDENTITY = "identity"
    BOX = "box"
    VARIETY = "variety"


class DensityRule(str, Enum):
    RECIPROCAL = "reciprocal"        # h(p^e) = p^-e
    CONST_OVER_P = "const_over_p"    # h(p^e) = c/p
    RESIDUE = "residue"              # residue counts of the family polynomial


class ExperimentSection(Section):
    output: Optional[str] = Field(default=None, description="CSV path; defaults to <output_dir>/<subcommand>.csv.")


class FamilySection(Section):
    name: FamilyKind = FamilyKind.IDENTITY
    polynomial: Optional[str] = Field(default=None, examples=["x^2 + 1"],
                                      description="Q for box families, Q2 for variety families.")
    constraint: Optional[str] = Field(default=None, examples=["x^2 + y^2 - z^2"],
                                      description="Q1 of a variety family.")
    dimension: int = Field(default=1, ge=1, le=3)
    box_lower: List[float] = Field(default_factory=lambda: [0.0])
    box_upper: List[float] = Field(default_factory=lambda: [1.0])

    @model_validator(mode="after")
    def _check_kind(self):
        if self.name != FamilyKind.IDENTITY and not self.polynomial:
            raise ValueError(f"family '{self.name.value}' needs a polynomial")
        if self.name == FamilyKind.VARIETY and not self.constraint:
            raise ValueError("variety family needs a constraint polynomial")
        if self.name == FamilyKind.BOX and not (len(self.box_lower) == len(self.box_upper) == self.dimension):
            raise ValueError("box_lower and box_upper need one entry per dimension")
        return self


class FunctionSection(Section):
    name: str = Field(default="one", examples=["tau"])
    base: Optional[float] = Field(default=None, gt=0, description="Base of pow_big_omega.")
    prime_powers: Optional[List[float]] = Field(
        default=None, description="f(p^e) = prime_powers[e - 1] for every p; overrides name.")
    default: float = Field(default=0.0, ge=0, description="f(p^e) past the prime_powers table.")

    @field_validator("prime_powers")
    @classmethod
    def _check_nonnegative(cls, values):
        if values is not None and any(v < 0 for v in values):
            raise ValueError("prime_powers must be nonnegative")
        return values


class DensitySection(Section):
    rule: DensityRule = DensityRule.RECIPROCAL
    c: float = Field(default=1.0, gt=0, description="Numerator of const_over_p.")
    kappa: float = Field(default=1.0, gt=0)
    lambda1: float = Field(default=1.0, gt=0)
    lambda2: float = Field(default=0.0, ge=0)
    B: float = Field(default=1.0, gt=0)
    K: float = Field(default=2.0, gt=0)


class ModelSection(Section):
    theta: float = Field(default=0.5, gt=0, description="Level of distribution.")
    xi: float = Field(default=0.9, gt=0, description="Error exponent.")
    alpha: float = Field(default=1.0, gt=0)
    B_tilde: float = Field(default=1.0, gt=0)
    m_choice: MChoice = MChoice.TOTAL
    m_scale: float = Field(default=1.0, gt=0)
    m_power: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_exponents(self):
        if max(self.theta, self.xi) >= 1:
            raise ValueError(
                f"equidistribution needs max{{theta, xi}} < 1, got theta={self.theta}, xi={self.xi}")
        return self


class GridSection(Section):
    T: List[float] = Field(default_factory=lambda: [1e4, 1e5, 1e6], min_length=1)

    @field_validator("T")
    @classmethod
    def _check_increasing(cls, values):
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("T grid must be strictly increasing")
        if values[0] < 1:
            raise ValueError("T grid values must be >= 1")
        return values


class LimitsSection(Section):
    prime_limit: Optional[int] = Field(default=None, ge=2, description="Defaults to settings.prime_limit.")
    a_max: Optional[int] = Field(default=None, ge=1, description="Defaults to settings.a_max.")
    d_limit: Optional[int] = Field(default=None, ge=1, description="Defaults to floor(M^theta) at each T.")
    sample_limit: int = Field(default=1000, ge=2)
    exponent_limit: int = Field(default=8, ge=1)
    density_prime_limit: int = Field(default=10_000, ge=3)


class SieveSection(Section):
    kappa: float = Field(default=1.0, gt=0)
    z: float = Field(default=100.0, gt=1)
    y: float = Field(default=1e4, gt=1)
    side: str = Field(default="both", pattern="^(upper|lower|both)$")
    beta: Optional[float] = Field(default=None, gt=0)
    n_limit: int = Field(default=100_000, ge=2)
    f_c: float = Field(default=1.0, gt=0, description="Accuracy density f(p) = f_c / p.")
    K: float = Field(default=2.0, gt=0)


LemmaValue = Union[float, int]


class LemmaSection(Section):
    id: str = Field(default="smooth-tail", examples=["series-tail"])
    parameter: Optional[str] = Field(default=None, description="Swept argument or envelope field.")
    values: List[LemmaValue] = Field(default_factory=list)
    F: str = "smooth_density"
    G: str = "one"
    # evaluator arguments
    x: Optional[float] = None
    z: Optional[float] = None
    A: Optional[float] = None
    c: Optional[int] = None
    beta: Optional[float] = None
    T: Optional[float] = None
    V: Optional[float] = None
    epsilon: Optional[float] = None
    a: Optional[int] = None
    alpha2: Optional[float] = None
    alpha3: Optional[float] = None
    gamma: Optional[float] = None
    a_max: Optional[int] = None
    sample_limit: Optional[int] = None
    # envelope constants
    c0: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    c3: Optional[float] = None
    C: Optional[float] = None
    C_prime: Optional[float] = None
    beta0: Optional[float] = None
    varpi: Optional[float] = None
    Upsilon: Optional[float] = None
    Psi: Optional[float] = None
    nu1: Optional[float] = None

    @model_validator(mode="after")
    def _check_sweep(self):
        if (self.parameter is None) != (not self.values):
            raise ValueError("parameter and values go together")
        return self


class CheckSection(Section):
    A: float = Field(default=2.0, ge=1)
    epsilon: float = Field(default=1.0, gt=0)
    C: float = Field(default=2.0, gt=0)
    L: Optional[int] = Field(default=None, ge=0, description="Omega bound of the positivity check.")
    m_limit: int = Field(default=1000, ge=2)


class ExperimentConfig(BaseModel):
    """One experiment file: flat key = value pairs under [section] headers."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    family: FamilySection = Field(default_factory=FamilySection)
    function: FunctionSection = Field(default_factory=FunctionSection)
    density: DensitySection = Field(default_factory=DensitySection)
    model: ModelSection = Field(default_factory=ModelSection)
    grid: GridSection = Field(default_factory=GridSection)
    limits: LimitsSection = Field(default_factory=LimitsSection)
    sieve: SieveSection = Field(default_factory=SieveSection)
    lemma: LemmaSection = Field(default_factory=LemmaSection)
    check: CheckSection = Field(default_factory=CheckSection)

    def metadata(self, sections: List[str]) -> Dict[str, object]:
        """section.field -> value for the named sections, unset optionals left out."""
        flat: Dict[str, object] = {}
        for section in sections:
            for key, value in getattr(self, section).model_dump(mode="json", exclude_none=True).items():
                flat[f"{section}.{key}"] = value
        return flat
