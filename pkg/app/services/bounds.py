import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.config import settings
from app.core.exceptions import DegenerateProductError, DomainError, HypothesisViolation
from app.models.arith import FactoredInteger
from app.models.bounds import (
    CASE_ORDER, BoundReport, CaseIIDiagnostic, CaseIIRow, CaseLabel, CaseSummary,
    CaseTable, DecompositionConstants, FlatRoughSplit, LowerBoundConstants,
)
from app.models.families import EquidistModel
from app.models.functions import ArithmeticFunction, DensityParams, GrowthParams
from app.services.arith import (
    PrimeTables, factor_pairs, log_one_minus, multiplicative_table, small_primes,
)
from app.services.families import FamilyService, WeightedFamily
from app.services.functions import FunctionClassService, evaluate, value_table

CLASSIFY_FLOOR = 16.0
POSITIVITY_OMEGA = 3
POSITIVITY_LIMIT = 1000


# ==========================================================================
# CONSTANTS
# ==========================================================================

def compute_constants(model: EquidistModel, params: DensityParams,
                      M: float) -> Tuple[DecompositionConstants, LowerBoundConstants]:
    """Decomposition constants (eta1, eta2, eta3, Z) and lower-bound constants (v, v0, z) at M = M(T)."""
    alpha, theta, xi = model.alpha, model.theta, model.xi
    lambda1, lambda2 = params.lambda1, params.lambda2

    eta1 = min(xi / 20.0, theta / 2.0, 0.5) / alpha
    eta2 = 0.5
    eta3 = min(lambda1 * eta2 / (2.0 * (1.0 + lambda1 + lambda2)), 0.5)
    decomposition = DecompositionConstants(eta1=eta1, eta2=eta2, eta3=eta3, Z=M ** (alpha * eta1))

    denominator = 1.0 + 9.0 * params.kappa + math.log(2.0) + 10.0 * math.log(params.K)
    # K < 1 can drive the denominator to zero or below; v then takes its cap
    v = min(1.0, theta * min(0.25, xi / (4.0 * theta)) / denominator) if denominator > 0 else 1.0
    lower = LowerBoundConstants(v=v, v0=min(v / 2.0, theta / 2.0), z=M**v)
    return decomposition, lower


def case_envelopes(model: EquidistModel, params: DensityParams,
                   consts: DecompositionConstants, M: float) -> Dict[CaseLabel, float]:
    """Error envelopes of the four cases with their implied constants dropped."""
    alpha, xi = model.alpha, model.xi
    lambda1, lambda2 = params.lambda1, params.lambda2
    eta1, eta2, eta3 = consts.eta1, consts.eta2, consts.eta3
    c = min(lambda1 / 2.0, 1.0 / (1 + math.floor(2.0 * lambda2 / lambda1)))
    beta1 = min(alpha * eta1 * (lambda1 * eta2 - eta3 * (1.0 + lambda1 + lambda2)),
                xi - alpha * eta1 * eta3)
    beta2 = min(xi - alpha * eta1, alpha * eta1 * (1.0 - eta2) * c / 2.0)
    return {
        CaseLabel.I: M ** (1.0 - xi / 3.0),
        CaseLabel.II: M ** (1.0 - beta1),
        CaseLabel.III: M ** (1.0 - beta2),
        CaseLabel.IV: M ** (1.0 - xi / 3.0),
    }


# ==========================================================================
# SPLITS AND CASES
# ==========================================================================

def split_flat_rough(c: FactoredInteger, Z: float) -> FlatRoughSplit:
    """Greedy prefix of full prime powers, smallest primes first, while the product stays <= Z."""
    if Z < 1:
        raise DomainError(f"Z >= 1 required, got {Z!r}.")
    d = 1
    for p, e in c.factors:
        q = p**e
        if d * q > Z:
            return FlatRoughSplit(d=d, b=c.value // d, rough_prime=p)
        d *= q
    return FlatRoughSplit(d=d, b=1)


def flat_part(c: FactoredInteger, z: float) -> int:
    """prod_{p <= z} p^(v_p(c))."""
    return math.prod(p**e for p, e in c.factors if p <= z)


def _case_thresholds(Z: float, consts: DecompositionConstants) -> Tuple[float, float, float]:
    if Z < CLASSIFY_FLOOR:
        raise DomainError(f"Case classification needs Z >= {CLASSIFY_FLOOR:g}, got {Z!r}.")
    log_Z = math.log(Z)
    return Z**consts.eta3, Z ** (1.0 - consts.eta2), log_Z * math.log(log_Z)


def classify_case(split: FlatRoughSplit, Z: float, consts: DecompositionConstants) -> CaseLabel:
    """Cases (i) to (iv), first match wins; b = 1 counts as P-(b) = infinity."""
    rough_cut, flat_cut, tiny = _case_thresholds(Z, consts)
    rough = math.inf if split.rough_prime is None else split.rough_prime
    if rough >= rough_cut:
        return CaseLabel.I
    if split.d <= flat_cut:
        return CaseLabel.II
    if rough <= tiny:
        return CaseLabel.III
    return CaseLabel.IV


def classify_codes(d: np.ndarray, rough: np.ndarray, Z: float,
                   consts: DecompositionConstants) -> np.ndarray:
    """Vectorised classify_case: indices into CASE_ORDER; rough = 0 marks b = 1."""
    rough_cut, flat_cut, tiny = _case_thresholds(Z, consts)
    low = np.where(rough == 0, np.inf, rough.astype(np.float64))
    codes = np.full(len(d), 3, dtype=np.int8)
    codes[low <= tiny] = 2
    codes[d <= flat_cut] = 1
    codes[low >= rough_cut] = 0
    return codes


def split_arrays(values: np.ndarray, Z: float, tables: PrimeTables) -> Tuple[np.ndarray, np.ndarray]:
    """(d, P-(b)) for every value, P-(b) = 0 when b = 1."""
    if len(values) and int(values.max()) > tables.limit:
        pairs = [split_flat_rough(FactoredInteger(value=v, factors=tuple(factor_pairs(v, tables))), Z)
                 for v in values.tolist()]
        return (np.array([s.d for s in pairs], dtype=np.int64),
                np.array([s.rough_prime or 0 for s in pairs], dtype=np.int64))

    spf = tables.smallest_prime_factor
    rest = values.astype(np.int64).copy()
    d = np.ones(len(rest), dtype=np.int64)
    rough = np.zeros(len(rest), dtype=np.int64)
    active = rest > 1
    while active.any():
        idx = np.nonzero(active)[0]
        r = rest[idx]
        p = spf[r].astype(np.int64)
        q = p.copy()
        more = (r // q) % p == 0
        while more.any():
            q[more] *= p[more]
            more &= (r // q) % p == 0
        fits = d[idx] * q <= Z
        grow, stop = idx[fits], idx[~fits]
        d[grow] *= q[fits]
        rest[grow] //= q[fits]
        rough[stop] = p[~fits]
        active[stop] = False
        active[grow] = rest[grow] > 1
    return d, rough


def flat_part_arrays(values: np.ndarray, z: float, tables: PrimeTables) -> np.ndarray:
    if len(values) and int(values.max()) > tables.limit:
        return np.array([math.prod(p**e for p, e in factor_pairs(v, tables) if p <= z)
                         for v in values.tolist()], dtype=np.int64)
    spf = tables.smallest_prime_factor
    rest = values.astype(np.int64).copy()
    flat = np.ones(len(rest), dtype=np.int64)
    active = rest > 1
    while active.any():
        idx = np.nonzero(active)[0]
        p = spf[rest[idx]].astype(np.int64)
        small = p <= z
        take = idx[small]
        flat[take] *= p[small]
        rest[take] //= p[small]
        active[idx[~small]] = False
        active[take] = rest[take] > 1
    return flat


def case_ii_diagnostic(model: EquidistModel, consts: DecompositionConstants, M: float,
                       T: Optional[float] = None) -> CaseIIDiagnostic:
    """m_q, n_q, f_q = min(m_q, n_q) and h(q^f_q) for primes q < Z^eta3."""
    h = model.density_at(T) if T is not None else model.h
    top = consts.Z**consts.eta3
    flat_cut = consts.Z**consts.eta2
    level = M**model.theta
    rows = []
    for q in small_primes(max(2, math.ceil(top))):
        if q >= top:
            break
        m = 1
        while q**m <= flat_cut:
            m += 1
        n = 0
        while q ** (n + 1) <= level:
            n += 1
        f_q = min(m, n)
        rows.append(CaseIIRow(q=q, m_q=m, n_q=n, f_q=f_q,
                              h_q_fq=h.at_prime_power(q, f_q) if f_q >= 1 else 1.0))
    return CaseIIDiagnostic(rows=rows, total=math.fsum(r.h_q_fq for r in rows))


# ==========================================================================
# BOTH SIDES OF THE ESTIMATES
# ==========================================================================

class BoundsService:
    def __init__(self, tables: PrimeTables):
        self.tables = tables
        self.families = FamilyService(tables)

    def _f_values(self, f: ArithmeticFunction, values: np.ndarray) -> np.ndarray:
        if len(values) == 0:
            return np.zeros(0)
        top = int(values.max())
        if top <= self.tables.limit:
            return value_table(f, top, self.tables)[values]
        return np.fromiter((evaluate(f, v, self.tables) for v in values.tolist()),
                           dtype=np.float64, count=len(values))

    def _terms(self, fam: WeightedFamily, f: ArithmeticFunction, T: float) -> Tuple[np.ndarray, np.ndarray]:
        support = fam.support(T)
        return support.values, support.weights * self._f_values(f, support.values)

    def lhs_sum(self, fam: WeightedFamily, f: ArithmeticFunction, T: float) -> float:
        """sum_a chi_T(a) f(c_a)."""
        _, terms = self._terms(fam, f, T)
        return math.fsum(terms.tolist())

    def _rhs(self, fam: WeightedFamily, f: ArithmeticFunction, T: float, lower_cut: float) -> float:
        h = fam.model.density_at(T)
        M = self.families.main_term(fam, T)
        self.tables.require(M, "M")
        primes = self.tables.primes_in(lower_cut, M)
        product = float(np.exp(log_one_minus(h.at_primes(primes), primes).sum()))
        n = math.floor(M)
        if n < 1:
            return 0.0
        fh = value_table(f, n, self.tables) * multiplicative_table(h.rule, n, self.tables)
        return M * product * math.fsum(fh[1:].tolist())

    def upper_bound_rhs(self, fam: WeightedFamily, f: ArithmeticFunction, T: float) -> float:
        """M prod_{B<p<=M} (1 - h(p)) sum_{a<=M} f(a) h(a)."""
        return self._rhs(fam, f, T, fam.model.density_at(T).params.B)

    def lower_bound_rhs(self, fam: WeightedFamily, f: ArithmeticFunction, T: float) -> float:
        """M prod_{p<=M} (1 - h(p)) sum_{a<=M} f(a) h(a), every prime included."""
        return self._rhs(fam, f, T, 0)

    def flat_restricted_lhs(self, fam: WeightedFamily, f: ArithmeticFunction, T: float) -> float:
        """Part of the lhs whose c_a has flat part (at z = M^v) at most M^v0."""
        h = fam.model.density_at(T)
        M = self.families.main_term(fam, T)
        _, lower = compute_constants(fam.model, h.params, M)
        values, terms = self._terms(fam, f, T)
        keep = flat_part_arrays(values, lower.z, self.tables) <= M**lower.v0
        return math.fsum(terms[keep].tolist())

    # ==========================================================================
    # REPORTS
    # ==========================================================================

    def _classified(self, fam: WeightedFamily, f: ArithmeticFunction, T: float):
        h = fam.model.density_at(T)
        M = self.families.main_term(fam, T)
        consts, _ = compute_constants(fam.model, h.params, M)
        Z_cls = max(consts.Z, CLASSIFY_FLOOR)
        values, terms = self._terms(fam, f, T)
        d, rough = split_arrays(values, Z_cls, self.tables)
        codes = classify_codes(d, rough, Z_cls, consts)
        return M, consts, Z_cls, terms, codes

    def bound_report(self, fam: WeightedFamily, f: ArithmeticFunction, T: float,
                     L: int = POSITIVITY_OMEGA, m_limit: int = POSITIVITY_LIMIT) -> BoundReport:
        """Both estimates at T; the lower one only for multiplicative f with min{f(m): Omega(m) <= L} > 0."""
        # 1. Left side, split by case
        M, consts, Z_cls, terms, codes = self._classified(fam, f, T)
        lhs = math.fsum(terms.tolist())
        contributions = {label: math.fsum(terms[codes == k].tolist())
                         for k, label in enumerate(CASE_ORDER)}

        # 2. Upper estimate
        rhs_upper = self.upper_bound_rhs(fam, f, T)
        ratio_upper = lhs / rhs_upper if rhs_upper > 0 else math.inf

        # 3. Lower estimate, only for multiplicative f positive on Omega(m) <= L and a nondegenerate product
        rhs_lower = ratio_lower = None
        if not f.is_multiplicative:
            logger.warning(f"Lower bound skipped at T={T!r}: '{f.name}' is not multiplicative")
        elif (minimum := FunctionClassService(self.tables).check_lower_positivity(f, L, m_limit)) <= 0:
            logger.warning(f"Lower bound skipped at T={T!r}: min of '{f.name}' over Omega(m) <= {L}, "
                           f"m <= {m_limit} is {minimum!r}")
        else:
            try:
                rhs_lower = self.lower_bound_rhs(fam, f, T)
                ratio_lower = lhs / rhs_lower if rhs_lower > 0 else math.inf
            except DegenerateProductError as exc:
                logger.warning(f"Lower bound absent at T={T!r}: {exc.detail}")

        logger.debug(f"T={T!r}: lhs={lhs!r}, ratio_upper={ratio_upper!r}, ratio_lower={ratio_lower!r}")
        return BoundReport(T=T, M=M, Z=consts.Z, Z_cls=Z_cls, lhs=lhs,
                           rhs_upper=rhs_upper, ratio_upper=ratio_upper,
                           rhs_lower=rhs_lower, ratio_lower=ratio_lower,
                           case_contributions=contributions)

    def bound_scan(self, fam: WeightedFamily, f: ArithmeticFunction, T_grid: Sequence[float],
                   workers: Optional[int] = None, growth: Optional[GrowthParams] = None,
                   sample_limit: int = 1000, L: int = POSITIVITY_OMEGA,
                   m_limit: int = POSITIVITY_LIMIT) -> List[BoundReport]:
        """One BoundReport per T, ordered by T whatever the thread count."""
        grid = sorted(T_grid)
        if growth is not None:
            report = FunctionClassService(self.tables).check_growth_class(f, growth, sample_limit)
            if not report.passed:
                raise HypothesisViolation(
                    f"'{f.name}' fails the growth condition (worst ratio {report.worst_ratio!r}).",
                    witness=report.witness)

        logger.info(f"Bound scan of {fam.name} with f='{f.name}' over {len(grid)} values of T")
        with ThreadPoolExecutor(max_workers=workers or settings.workers) as pool:
            reports = list(pool.map(lambda T: self.bound_report(fam, f, T, L, m_limit), grid))
        logger.info(f"Bound scan done: ratio_upper {[round(r.ratio_upper, 6) for r in reports]}")
        return reports

    def case_table(self, fam: WeightedFamily, f: ArithmeticFunction, T: float) -> CaseTable:
        """Per-case counts, weights, contributions and envelopes, plus the flat-restricted lhs."""
        M, consts, Z_cls, terms, codes = self._classified(fam, f, T)
        weights = fam.support(T).weights
        lhs = math.fsum(terms.tolist())
        envelopes = case_envelopes(fam.model, fam.model.density_at(T).params, consts, M)
        cases = []
        for k, label in enumerate(CASE_ORDER):
            mask = codes == k
            contribution = math.fsum(terms[mask].tolist())
            cases.append(CaseSummary(
                case=label, count=int(mask.sum()), weight=math.fsum(weights[mask].tolist()),
                contribution=contribution, share=contribution / lhs if lhs > 0 else 0.0,
                envelope=envelopes[label]))
        return CaseTable(T=T, M=M, Z=consts.Z, Z_cls=Z_cls, lhs=lhs,
                         lhs_flat=self.flat_restricted_lhs(fam, f, T), cases=cases)
