import math
from typing import Dict, Optional, Protocol

import numpy as np
from loguru import logger

from app.core.config import settings
from app.core.exceptions import DegenerateProductError, DomainError, PreconditionError
from app.models.sieve import (
    AccuracyResult, LowerEstimate, PropertyResult, SieveCheck, SieveSide,
    SieveWeights, SiftedSum,
)
from app.services.arith import (
    PrimeTables, coprime_mask, factor_pairs, log_one_minus, small_primes,
)
from app.services.families import FamilyService, WeightedFamily


class PrimeWeighted(Protocol):
    def at_prime_power(self, p: int, e: int) -> float: ...


def default_beta(kappa: float) -> float:
    """Truncation parameter 2*ceil(kappa) + 1."""
    return 2 * math.ceil(kappa) + 1


def build_weights(kappa: float, y: float, z: float, side: SieveSide,
                  beta: Optional[float] = None,
                  max_weights: Optional[int] = None) -> SieveWeights:
    """
    Combinatorial beta-sieve: lambda_m = mu(m) for m = p_1 > ... > p_r, all p_i < z,
    when p_1...p_{l-1} p_l^(beta+1) < y for every odd l (upper side) or every even l
    (lower side), and m < y; otherwise 0.
    """
    if y <= 1 or z <= 1:
        raise DomainError(f"Sieve needs y > 1 and z > 1, got y={y!r}, z={z!r}.")
    side = SieveSide(side)
    beta = default_beta(kappa) if beta is None else beta
    cap = max_weights or settings.max_sieve_weights
    primes = [p for p in small_primes(max(2, math.ceil(z))) if p < z]
    checked_parity = 1 if side == SieveSide.UPPER else 0

    weights: Dict[int, int] = {1: 1}
    # (m, number of primes of m, index bound for the next smaller prime, mu(m))
    stack = [(1, 0, len(primes), 1)]
    while stack:
        m, depth, bound, mu = stack.pop()
        level = depth + 1
        for i in range(bound):
            p = primes[i]
            product = m * p
            if product >= y:
                break
            if level % 2 == checked_parity and m * p ** (beta + 1) >= y:
                break
            weights[product] = -mu
            stack.append((product, level, i, -mu))
        if len(weights) > cap:
            raise DomainError(
                f"Sieve support exceeds {cap} weights (y={y!r}, z={z!r}); lower y or raise max_sieve_weights.")

    logger.debug(f"beta-sieve {side.value}: kappa={kappa!r}, y={y!r}, z={z!r}, "
                 f"{len(weights)} nonzero weights")
    return SieveWeights(y=y, z=z, kappa=kappa, side=side, beta=beta, weights=weights)


def _squarefree_value(m: int, local: Dict[int, float]) -> float:
    value = 1.0
    for p, f_p in local.items():
        if m == 1:
            break
        if m % p == 0:
            m //= p
            value *= f_p
    return value


def _accuracy(w: SieveWeights, f: PrimeWeighted) -> AccuracyResult:
    primes = np.array([p for p in small_primes(max(2, math.ceil(w.z))) if p < w.z], dtype=np.int64)
    values = np.fromiter((f.at_prime_power(int(p), 1) for p in primes),
                         dtype=np.float64, count=len(primes))
    bad = np.nonzero((values >= 1.0) | (values < 0.0))[0]
    if len(bad):
        raise DegenerateProductError(int(primes[bad[0]]), float(values[bad[0]]),
                                     f"Sieve density needs 0 <= f(p) < 1, got f({int(primes[bad[0]])}) = {float(values[bad[0]])!r}.")
    reference = float(np.exp(log_one_minus(values, primes).sum())) if len(primes) else 1.0
    local = dict(zip(primes.tolist(), values.tolist()))
    total = math.fsum(lam * _squarefree_value(m, local) for m, lam in sorted(w.weights.items()))
    return AccuracyResult(sum=total, reference=reference,
                          relative_error=abs(total / reference - 1.0), sigma=w.sigma)


def main_term_accuracy(w: SieveWeights, f: PrimeWeighted) -> AccuracyResult:
    """sum_m lambda_m f(m) against prod_{p<z}(1 - f(p))."""
    return _accuracy(w, f)


def lower_sieve_estimate(w: SieveWeights, f: PrimeWeighted, K: float) -> LowerEstimate:
    """Checks sum_m lambda^-_m f(m) >= (1 - e^(1 + 9 kappa - s) K^10) prod_{p<z}(1 - f(p))."""
    if w.side != SieveSide.LOWER:
        raise DomainError("The lower estimate applies to lower-side weights.")
    accuracy = _accuracy(w, f)
    floor = (1.0 - math.exp(1.0 + 9.0 * w.kappa - w.sigma) * K**10) * accuracy.reference
    return LowerEstimate(sum=accuracy.sum, floor=floor, holds=accuracy.sum >= floor)


def verify_properties(w: SieveWeights, n_limit: int) -> SieveCheck:
    """
    Unit weight, bounded weights, support cutoff, the sandwich inequality and
    exactness on integers coprime to P(z), the last two over 1 < n <= n_limit.
    """
    def result(name: str, bad: np.ndarray, checked: int, offset: int = 0) -> PropertyResult:
        return PropertyResult(name=name, violations=int(len(bad)), checked=checked,
                              witness=int(bad[0]) + offset if len(bad) else None)

    ms = np.array(sorted(w.weights), dtype=np.int64)
    lams = np.array([w.weights[m] for m in ms.tolist()], dtype=np.int64)
    results = [
        PropertyResult(name="unit", violations=0 if w.weights.get(1) == 1 else 1,
                       checked=1, witness=None if w.weights.get(1) == 1 else 1),
        result("bounded", ms[np.abs(lams) > 1], len(ms)),
        result("cutoff", ms[ms >= w.y], len(ms)),
    ]

    sums = np.zeros(n_limit + 1, dtype=np.int64)
    for m, lam in zip(ms.tolist(), lams.tolist()):
        if m > n_limit:
            break
        sums[m::m] += lam
    coprime = np.ones(n_limit + 1, dtype=np.int64)
    for p in small_primes(max(2, math.ceil(w.z))):
        if p >= w.z or p > n_limit:
            break
        coprime[p::p] = 0

    n = slice(2, n_limit + 1)
    if w.side == SieveSide.UPPER:
        sandwich = np.nonzero(sums[n] < coprime[n])[0]
    else:
        sandwich = np.nonzero(sums[n] > coprime[n])[0]
    exact = np.nonzero((coprime[n] == 1) & (sums[n] != 1))[0]
    checked = max(n_limit - 1, 0)
    results.append(result("sandwich", sandwich, checked, offset=2))
    results.append(result("coprime_exact", exact, checked, offset=2))
    return SieveCheck(side=w.side, n_limit=n_limit, results=results)


class SieveService:
    """Sifted congruence sums of a family against their sieve envelopes."""

    def __init__(self, tables: PrimeTables):
        self.tables = tables
        self.families = FamilyService(tables)

    def sifted_sum_upper(self, fam: WeightedFamily, b: int, T: float, xi4: float,
                         xi3: Optional[float] = None) -> SiftedSum:
        """
        exact = sum of chi_T(a) over b | c_a with c_a free of primes p <= M^xi4, p !| b;
        bound = Gamma^kappa M h(b) prod_{B<p<=M, p!|b}(1 - h(p)) + M^(1 - xi/2).
        """
        model = fam.model
        h = model.density_at(T)
        params = h.params
        M = self.families.main_term(fam, T)
        theta, xi = model.theta, model.xi
        xi3 = theta / 2 if xi3 is None else xi3

        # 1. Preconditions
        if xi4 <= 0:
            raise PreconditionError(f"xi4 > 0 required, got {xi4!r}.")
        if not xi3 < theta:
            raise PreconditionError(f"xi3 < theta violated: xi3={xi3!r}, theta={theta!r}.")
        if b < 1 or b > M**xi3:
            raise PreconditionError(f"b <= M^xi3 violated: b={b}, M^xi3={M**xi3!r}.")
        gamma = max(1.0 / xi4, 1.0 / (theta - xi3), 1.0 / xi)
        if not math.log(M) > 4.0 * params.K * gamma:
            raise PreconditionError(
                f"log M > 4 K Gamma violated: log M={math.log(M)!r}, 4 K Gamma={4.0 * params.K * gamma!r}.")

        # 2. Exact sifted sum by direct enumeration
        support = fam.support(T)
        limit = M**xi4
        sifting = [p for p in small_primes(max(2, math.floor(limit))) if p <= limit and b % p != 0]
        divisible = support.values % b == 0
        kept = coprime_mask(support.values[divisible], sifting)
        exact = float(support.weights[divisible][kept].sum())

        # 3. Envelope
        primes = self.tables.primes_in(params.B, M)
        logs = log_one_minus(h.at_primes(primes), primes)
        b_primes = {p for p, _ in factor_pairs(b, self.tables)}
        keep = np.array([p not in b_primes for p in primes.tolist()], dtype=bool)
        product = float(np.exp(logs[keep].sum()))
        h_b = math.prod(h.at_prime_power(p, e) for p, e in factor_pairs(b, self.tables))
        bound = gamma**params.kappa * M * h_b * product + M ** (1.0 - xi / 2.0)
        logger.debug(f"Sifted sum b={b}, T={T!r}: exact={exact!r}, bound={bound!r}")
        return SiftedSum(exact=exact, bound=bound, gamma=gamma, sifting_limit=limit)
