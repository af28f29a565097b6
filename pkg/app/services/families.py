import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.exceptions import DomainError, PreconditionError
from app.models.families import DiagnosticsRow, DiagnosticsTable, EquidistModel, MChoice
from app.models.functions import ClassReport, ConditionResult
from app.services.arith import PrimeTables, factor_pairs, log_one_minus, multiplicative_table
from app.services.functions import reciprocal_density
from app.utils.polynomial import INT64_HEADROOM, IntegerPolynomial

MAX_SUPPORT = 10_000_000
BINCOUNT_CAP = 50_000_000
RESIDUE_CAP = 1_000_000
EPS = 1e-9


@dataclass(frozen=True)
class FamilySupport:
    """Materialised support of chi_T: parallel arrays of weights and values c_a."""
    weights: np.ndarray
    values: np.ndarray

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.values)


class WeightedFamily:
    """
    Weighted family (A, chi_T, c_a) with its equidistribution model.
    `materialize(T)` must be a pure function of T.
    """

    def __init__(self, name: str, materialize: Callable[[float], FamilySupport],
                 model: EquidistModel, grid: Optional[Sequence[float]] = None):
        self.name = name
        self.model = model
        self.grid = list(grid) if grid is not None else None
        self._materialize = materialize
        self._cache: Dict[float, FamilySupport] = {}
        self._lock = threading.Lock()

    def support(self, T: float) -> FamilySupport:
        with self._lock:
            cached = self._cache.get(T)
        if cached is None:
            cached = self._materialize(T)
            with self._lock:
                if len(self._cache) >= 4:
                    self._cache.pop(next(iter(self._cache)))
                self._cache[T] = cached
        return cached

    def enumerate(self, T: float) -> Iterator[Tuple[float, int]]:
        support = self.support(T)
        return zip(support.weights.tolist(), support.values.tolist())

    def __repr__(self) -> str:
        return f"WeightedFamily({self.name!r})"


# ==========================================================================
# BUILT-IN FAMILIES
# ==========================================================================

def default_identity_model() -> EquidistModel:
    """h(d) = 1/d, M(T) = C_1(T) = floor(T), theta = 1/2, xi = 9/10."""
    return EquidistModel(h=reciprocal_density(), m_choice=MChoice.TOTAL, theta=0.5, xi=0.9)


def make_identity_family(T_grid: Optional[Sequence[float]] = None,
                         model: Optional[EquidistModel] = None) -> WeightedFamily:
    """chi_T = indicator of [1, T], c_n = n."""
    def materialize(T: float) -> FamilySupport:
        n = np.arange(1, math.floor(T) + 1, dtype=np.int64)
        return FamilySupport(weights=np.ones(len(n)), values=n)

    return WeightedFamily("identity", materialize, model or default_identity_model(), T_grid)


def _lattice(bounds: Sequence[Tuple[int, int]]) -> np.ndarray:
    sizes = [max(hi - lo + 1, 0) for lo, hi in bounds]
    count = math.prod(sizes)
    if count > MAX_SUPPORT:
        raise DomainError(f"Support of {count} lattice points exceeds {MAX_SUPPORT}.")
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1) if axes else np.zeros((0, 0), np.int64)


def _check_polynomial(Q: IntegerPolynomial, dimension: int, label: str) -> None:
    if Q.is_zero:
        raise DomainError(f"{label} is the zero polynomial.")
    if Q.degree < 1:
        raise DomainError(f"{label} must have degree >= 1.")
    if Q.dimension != dimension or dimension > 3:
        raise DomainError(f"{label} must be a polynomial in {dimension} <= 3 variables.")


def _guarded_values(Q: IntegerPolynomial, points: np.ndarray, radius: int) -> np.ndarray:
    if Q.magnitude_bound(radius) >= INT64_HEADROOM:
        raise DomainError(f"|{Q.source or 'Q'}| may exceed 64 bits on this box.")
    return Q.evaluate(points)


def make_polynomial_box_family(Q: IntegerPolynomial, dimension: int,
                               box: Sequence[Tuple[float, float]], model: EquidistModel,
                               region: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                               T_grid: Optional[Sequence[float]] = None) -> WeightedFamily:
    """
    Values |Q(x)| over integer points x of the dilated box T*D with Q(x) != 0.
    `region`, if given, restricts D further: it receives x / T row-wise.
    """
    _check_polynomial(Q, dimension, "Q")
    if len(box) != dimension:
        raise DomainError(f"Box has {len(box)} sides for a {dimension}-dimensional polynomial.")
    for lo, hi in box:
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise DomainError(f"Box side [{lo}, {hi}] is not a bounded interval.")

    def materialize(T: float) -> FamilySupport:
        bounds = [(math.ceil(T * lo - EPS), math.floor(T * hi + EPS)) for lo, hi in box]
        points = _lattice(bounds)
        if region is not None and len(points):
            points = points[region(points / T)]
        radius = max((max(abs(lo), abs(hi)) for lo, hi in bounds), default=1)
        values = np.abs(_guarded_values(Q, points, radius))
        values = values[values != 0]
        return FamilySupport(weights=np.ones(len(values)), values=values)

    return WeightedFamily(f"box[{Q.source}]", materialize, model, T_grid)


def make_variety_family(Q1: IntegerPolynomial, Q2: IntegerPolynomial, dimension: int,
                        model: EquidistModel,
                        T_grid: Optional[Sequence[float]] = None) -> WeightedFamily:
    """Values |Q2(x)| over x in [-T, T]^n with Q1(x) = 0 and Q2(x) != 0."""
    _check_polynomial(Q1, dimension, "Q1")
    _check_polynomial(Q2, dimension, "Q2")

    def materialize(T: float) -> FamilySupport:
        t = math.floor(T)
        points = _lattice([(-t, t)] * dimension)
        on_variety = _guarded_values(Q1, points, t) == 0
        values = np.abs(_guarded_values(Q2, points[on_variety], t))
        values = values[values != 0]
        return FamilySupport(weights=np.ones(len(values)), values=values)

    return WeightedFamily(f"variety[{Q1.source};{Q2.source}]", materialize, model, T_grid)


def residue_density(Q: IntegerPolynomial, residue_cap: int = RESIDUE_CAP) -> Callable[[int, int], float]:
    """
    Prime-power rule h(p^e) = #{x mod p^e : Q(x) = 0 mod p^e} / p^(e n).
    Counted exhaustively while p^(e n) <= residue_cap, lifted by h(p^(e+1)) = h(p^e)/p
    beyond, and p^-e when not even p^n residues are affordable.
    """
    n = Q.dimension

    @lru_cache(maxsize=None)
    def counted(p: int, k: int) -> float:
        modulus = p**k
        points = _lattice([(0, modulus - 1)] * n)
        zeros = int(np.count_nonzero(Q.evaluate_mod(points, modulus) == 0))
        return zeros / float(modulus) ** n

    def rule(p: int, e: int) -> float:
        k = 0
        while k < e and p ** ((k + 1) * n) <= residue_cap:
            k += 1
        if k == 0:
            return float(p) ** (-e)
        return counted(p, k) * float(p) ** (-(e - k))

    return rule


# ==========================================================================
# CONGRUENCE SUMS AND DIAGNOSTICS
# ==========================================================================

class FamilyService:
    def __init__(self, tables: PrimeTables):
        self.tables = tables

    def main_term(self, fam: WeightedFamily, T: float) -> float:
        """M(T) according to the family's model."""
        model = fam.model
        if model.m_choice == MChoice.TOTAL:
            return fam.support(T).total_weight
        if model.m_choice == MChoice.T:
            return float(T)
        return model.m_scale * float(T) ** model.m_power

    def congruence_sums(self, fam: WeightedFamily, T: float, moduli: Sequence[int]) -> List[float]:
        """C_d(T) for each d in `moduli`."""
        support = fam.support(T)
        if any(d < 1 for d in moduli):
            raise DomainError("Moduli must be >= 1.")
        if len(support) == 0:
            return [0.0 for _ in moduli]
        top = int(support.values.max())
        if top <= BINCOUNT_CAP:
            mass = np.bincount(support.values, weights=support.weights)
            return [float(mass[d::d].sum()) for d in moduli]
        return [float(support.weights[support.values % d == 0].sum()) for d in moduli]

    def congruence_sum(self, fam: WeightedFamily, d: int, T: float) -> float:
        return self.congruence_sums(fam, T, [d])[0]

    def equidist_diagnostics(self, fam: WeightedFamily, T: float,
                             d_limit: Optional[int] = None) -> DiagnosticsTable:
        """
        Residuals r_d = C_d(T) - h(d) M and scores |r_d| / [h(d) M prod_{B<p<=M, p!|d}(1-h(p))^2 + M^(1-xi)]
        for d <= d_limit, which defaults to floor(M^theta).
        """
        model = fam.model
        h = model.density_at(T)
        M = self.main_term(fam, T)
        level = M ** model.theta
        if d_limit is None:
            d_limit = max(1, math.floor(level * (1 + EPS)))
        if d_limit > level * (1 + EPS):
            raise PreconditionError(
                f"d_limit = {d_limit} exceeds the level M^theta = {level!r}.")
        logger.info(f"Equidistribution diagnostics for {fam.name}: T={T!r}, M={M!r}, d <= {d_limit}")

        h_table = multiplicative_table(h.rule, d_limit, self.tables)
        invalid = np.nonzero(~np.isfinite(h_table[1:]) | (h_table[1:] < 0))[0]
        if len(invalid):
            raise DomainError(f"h(d) is negative or undefined at d = {int(invalid[0]) + 1}.")

        B = h.params.B
        primes = self.tables.primes_in(B, M)
        logs = log_one_minus(h.at_primes(primes), primes)
        log_all = float(logs.sum())
        local = dict(zip(primes.tolist(), logs.tolist())) if d_limit > 1 else {}

        sums = self.congruence_sums(fam, T, range(1, d_limit + 1))
        floor_term = M ** (1.0 - model.xi)
        rows = []
        for d, C_d in zip(range(1, d_limit + 1), sums):
            log_coprime = log_all - sum(local.get(p, 0.0) for p, _ in factor_pairs(d, self.tables))
            main = float(h_table[d]) * M
            residual = C_d - main
            envelope = main * math.exp(2.0 * log_coprime) + floor_term
            rows.append(DiagnosticsRow(d=d, C_d=C_d, h_d_M=main, residual=residual,
                                       score=abs(residual) / envelope))
        table = DiagnosticsTable(family=fam.name, T=T, M=M, rows=rows)
        logger.info(f"Max normalised score {table.max_score!r}")
        return table

    def check_family(self, fam: WeightedFamily, T_grid: Sequence[float]) -> ClassReport:
        """Increasing total weight along the grid and the growth bound c_a <= B~ M^alpha."""
        model = fam.model
        totals, worst_growth, growth_witness = [], 0.0, None
        growth_bad, growth_witnesses = 0, []
        for T in T_grid:
            support = fam.support(T)
            totals.append(support.total_weight)
            if len(support) == 0:
                continue
            M = self.main_term(fam, T)
            ceiling = model.B_tilde * M ** model.alpha
            top = int(support.values.max())
            ratio = top / ceiling
            if ratio > worst_growth:
                worst_growth, growth_witness = ratio, (T, top)
            if ratio > 1 + EPS:
                growth_bad += 1
                growth_witnesses.append((T, top))
        steps = [b / a if a > 0 else math.inf for a, b in zip(totals, totals[1:])]
        weight_bad = [(T, w) for T, w, s in zip(T_grid[1:], totals[1:], steps) if s <= 1.0]
        return ClassReport(subject=fam.name, conditions=[
            ConditionResult(
                condition="increasing_weight", passed=not weight_bad,
                slack=max((1.0 / s if s > 0 else math.inf for s in steps), default=0.0),
                witness=weight_bad[0] if weight_bad else None,
                violations=len(weight_bad), witnesses=weight_bad[:10],
                checked_range=f"{len(T_grid)} grid points"),
            ConditionResult(
                condition="growth", passed=growth_bad == 0, slack=worst_growth,
                witness=growth_witness, violations=growth_bad,
                witnesses=growth_witnesses[:10],
                checked_range=f"{len(T_grid)} grid points"),
        ])
