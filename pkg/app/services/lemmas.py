import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.config import settings
from app.core.exceptions import (
    DegenerateProductError, DomainError, HypothesisViolation, PreconditionError,
)
from app.models.functions import ArithmeticFunction, ClassReport, ConditionResult, DensityFunction
from app.models.lemmas import EnvelopeParams, LemmaReport
from app.services.arith import PrimeTables, iter_smooth, log_one_minus, multiplicative_table
from app.services.functions import coprime_pair_scan, value_table

RATIO_TOLERANCE = 1e-12
SERIES_TOLERANCE = 1e-9
EULER_TOLERANCE = 1e-16
MAX_EXPONENT = 200

LEMMA_IDS: Dict[str, str] = {
    "smooth-tail": "smooth_tail",
    "euler-product": "euler_product_bound",
    "majorant": "majorant_check",
    "series-tail": "smooth_series_tail",
    "tail-vs-head": "tail_versus_head",
    "series-ratio": "smooth_series_ratio",
    "squarefree-sum": "squarefree_weighted_sum",
    "exp-prime-sum": "exp_prime_sum_bound",
    "prime-weight-inflation": "prime_weight_inflation",
}


def build_report(lemma: str, lhs: float, rhs: float, parameters: Dict,
                 truncation_error: float = 0.0, extras: Optional[Dict[str, float]] = None,
                 scale: float = 1.0) -> LemmaReport:
    """implied_constant = scale * lhs / rhs, or 0 when both sides vanish."""
    if rhs == 0.0:
        if lhs > 0.0:
            raise DomainError(f"{lemma}: the envelope vanishes while the sum is {lhs!r}.")
        implied = 0.0
    else:
        implied = scale * lhs / rhs
    if not math.isfinite(implied):
        raise DomainError(f"{lemma}: implied constant is not finite (lhs={lhs!r}, rhs={rhs!r}).")
    return LemmaReport(lemma=lemma, lhs=lhs, rhs_envelope=rhs, implied_constant=implied,
                       truncation_error=truncation_error, parameters=parameters,
                       extras=extras or {})


def _geometric_sum(term: Callable[[int], float], tail: Callable[[int], float],
                   tolerance: float) -> Tuple[float, float]:
    """
    Sums term(1), term(2), ... until tail(e), a bound on everything after term(e),
    drops below tolerance * (1 + partial sum). Returns (partial sum, last tail bound).
    """
    total, e = 0.0, 0
    while True:
        e += 1
        total += term(e)
        remainder = tail(e)
        if remainder <= tolerance * (1.0 + total) or e >= MAX_EXPONENT:
            return total, remainder


def _require_multiplicative(f: ArithmeticFunction, role: str) -> None:
    if not f.is_multiplicative:
        raise DomainError(f"{role} = '{f.name}' must be multiplicative.")


@dataclass(frozen=True)
class SmoothSeries:
    """Enumerated pieces of H(V) = sum over P+(n) < V of F(n) G(n) prod_{c0<p|n} (1 - F(p))^-1."""
    head: float
    tail: float
    truncation: float
    euler: Optional[float]

    @property
    def enumerated(self) -> float:
        return self.head + self.tail


class LemmaLabService:
    """
    Exact left sides of the smooth-number, Euler-product and sieve-density
    estimates, each next to its explicit envelope.
    """

    def __init__(self, tables: PrimeTables):
        self.tables = tables

    # ==========================================================================
    # HELPERS
    # ==========================================================================

    def _check_smooth_bound(self, F: ArithmeticFunction, params: EnvelopeParams,
                            primes: Sequence[int], limit: float, squares: bool = False) -> None:
        """
        F(p^e) <= min{c0/p, p^(c1 - e c2)} for the given primes and p^e <= limit;
        with `squares`, also F(p^e) <= c3/p^2 for e >= 2.
        """
        _require_multiplicative(F, "F")
        for p in primes:
            q, e = p, 1
            while q <= limit:
                value = F.at_prime_power(p, e)
                bound = min(params.c0 / p, float(p) ** (params.c1 - e * params.c2))
                if squares and e >= 2:
                    bound = min(bound, params.c3 / float(p) ** 2)
                if value < 0 or value > bound * (1.0 + RATIO_TOLERANCE):
                    raise HypothesisViolation(
                        f"F({p}^{e}) = {value!r} exceeds its bound {bound!r}.", witness=(p, e))
                q *= p
                e += 1

    def _inverse_weights(self, F: ArithmeticFunction, params: EnvelopeParams,
                         primes: Sequence[int]) -> Dict[int, float]:
        """p -> (1 - F(p))^-1 for p > c0, 1 otherwise."""
        weights = {}
        for p in primes:
            if p <= params.c0:
                weights[p] = 1.0
                continue
            f_p = F.at_prime_power(p, 1)
            if f_p >= 1.0:
                raise DegenerateProductError(
                    p, f_p, f"(1 - F({p}))^-1 degenerates: F({p}) = {f_p!r} >= 1.")
            weights[p] = 1.0 / (1.0 - f_p)
        return weights

    def _local_rule(self, F: ArithmeticFunction, G: ArithmeticFunction,
                    weights: Dict[int, float]) -> Callable[[int, int], float]:
        if G.is_multiplicative:
            return lambda p, e: F.at_prime_power(p, e) * G.at_prime_power(p, e) * weights[p]
        return lambda p, e: F.at_prime_power(p, e) * weights[p]

    def _enumerate_series(self, F: ArithmeticFunction, G: ArithmeticFunction,
                          primes: Sequence[int], weights: Dict[int, float],
                          bound: int, split: float) -> Tuple[float, float]:
        """(sum over a <= split, sum over split < a <= bound) of the smooth-series terms."""
        local = self._local_rule(F, G, weights)
        head: List[float] = []
        tail: List[float] = []
        for a, w in iter_smooth(primes, bound, local):
            if not G.is_multiplicative:
                w *= float(G.evaluator(a))
            (head if a <= split else tail).append(w)
        return math.fsum(head), math.fsum(tail)

    def _euler_series(self, F: ArithmeticFunction, G: ArithmeticFunction,
                      params: EnvelopeParams, primes: Sequence[int],
                      weights: Dict[int, float]) -> Optional[float]:
        """H(V) as an Euler product; None unless G is multiplicative."""
        if not G.is_multiplicative:
            return None
        logs = []
        for p in primes:
            ratio = float(p) ** (-params.c2 / 2.0)
            scale = params.C_prime * float(p) ** params.c1 / (1.0 - ratio)
            local, _ = _geometric_sum(
                lambda e: F.at_prime_power(p, e) * G.at_prime_power(p, e),
                lambda e: scale * ratio ** (e + 1),
                EULER_TOLERANCE)
            logs.append(math.log1p(weights[p] * local))
        return math.exp(math.fsum(logs))

    def _rankin_tail(self, F: ArithmeticFunction, G: ArithmeticFunction,
                     params: EnvelopeParams, primes: Sequence[int],
                     weights: Dict[int, float], a_max: int) -> float:
        """
        Bound on the part of H(V) beyond a_max: a_max^-delta G(1) prod_p (1 + w_p sum_e F(p^e) H(p^e) p^(e delta)),
        delta = c2/4, with H(p^e) = min{C^e, C' p^(e c2/2)} the majorant of G.
        """
        delta = params.c2 / 4.0
        g_one = 1.0 if G.is_multiplicative else float(G.evaluator(1))
        if g_one <= 0.0:
            return 0.0
        logs = [math.log(g_one), -delta * math.log(a_max)]
        for p in primes:
            log_p = math.log(p)
            ratio = math.exp(-delta * log_p)
            scale = params.C_prime * float(p) ** params.c1 / (1.0 - ratio)

            def term(e: int) -> float:
                f = F.at_prime_power(p, e)
                if f == 0.0:
                    return 0.0
                log_h = min(e * math.log(params.C), math.log(params.C_prime) + e * params.c2 / 2.0 * log_p)
                return math.exp(math.log(f) + log_h + e * delta * log_p)

            local, remainder = _geometric_sum(term, lambda e: scale * ratio ** (e + 1), SERIES_TOLERANCE)
            logs.append(math.log1p(weights[p] * (local + remainder)))
        return math.exp(math.fsum(logs))

    def _smooth_series(self, F: ArithmeticFunction, G: ArithmeticFunction,
                       params: EnvelopeParams, V: float, a_max: int,
                       split: float) -> SmoothSeries:
        primes = self.tables.primes_below(V).tolist()
        self._check_smooth_bound(F, params, primes, a_max)
        weights = self._inverse_weights(F, params, primes)
        head, tail = self._enumerate_series(F, G, primes, weights, a_max, split)
        euler = self._euler_series(F, G, params, primes, weights)
        if euler is not None:
            truncation = max(euler - (head + tail), 0.0)
        else:
            truncation = self._rankin_tail(F, G, params, primes, weights, a_max)
        logger.debug(f"Smooth series P+ < {V!r}: {head + tail!r} enumerated up to {a_max}, "
                     f"tail <= {truncation!r}")
        return SmoothSeries(head=head, tail=tail, truncation=truncation, euler=euler)

    def _series_value(self, F: ArithmeticFunction, G: ArithmeticFunction,
                      params: EnvelopeParams, V: float, a_max: int) -> Tuple[float, float]:
        """H(V) and the error of that value: Euler product when possible, else enumeration."""
        primes = self.tables.primes_below(V).tolist()
        weights = self._inverse_weights(F, params, primes)
        euler = self._euler_series(F, G, params, primes, weights)
        if euler is not None:
            return euler, 0.0
        series = self._smooth_series(F, G, params, V, a_max, split=a_max)
        return series.enumerated, series.truncation

    # ==========================================================================
    # SMOOTH TAILS AND EULER PRODUCTS
    # ==========================================================================

    def smooth_tail(self, F: ArithmeticFunction, params: EnvelopeParams, x: float, z: float) -> LemmaReport:
        """
        lhs = sum of F(n) over z < n <= x with P+(n) <= (log x)(log log x);
        envelope = z^-c exp(c' log x / (log log x)^(1/2)).
        """
        if x < 16 or z < 16:
            raise PreconditionError(f"x >= 16 and z >= 16 required, got x={x!r}, z={z!r}.")
        n_max = math.floor(x)
        self.tables.require(n_max, "x")

        # 1. Hypothesis on F up to x
        self._check_smooth_bound(F, params, self.tables.primes_in(0, n_max).tolist(), n_max)

        # 2. Exact sum over smooth n in (z, x]
        log_x = math.log(x)
        log_log_x = math.log(log_x)
        y = log_x * log_log_x
        primes = self.tables.primes_in(0, y).tolist()
        lhs = math.fsum(w for n, w in iter_smooth(primes, n_max, F.at_prime_power) if n > z)

        # 3. Envelope
        c = min(params.c2 / 2.0, 1.0 / (1 + math.floor(2.0 * params.c1 / params.c2)))
        c_prime = (c + 2.0 * (params.c0 + c)) / c
        rhs = z ** (-c) * math.exp(c_prime * log_x / math.sqrt(log_log_x))
        return build_report("smooth-tail", lhs, rhs, {"x": x, "z": z},
                            extras={"y": y, "c": c, "c_prime": c_prime})

    def euler_product_bound(self, F: ArithmeticFunction, params: EnvelopeParams, A: float,
                            c: int, beta: float, T: float) -> LemmaReport:
        """
        lhs = prod_{p<=T, p!|c} (1 + w_p sum_{i>=1, j>=0} min{C' p^((i+j) c2/2), A^(i+j)} F(p^(i+j)) (p^(beta i) - p^(beta (i-1))));
        the i-sum telescopes, leaving p^(beta e) - 1 for e = i + j. envelope = e^(beta log T).
        """
        if A <= 1:
            raise PreconditionError(f"A > 1 required, got {A!r}.")
        if c < 1:
            raise PreconditionError(f"c must be a positive integer, got {c}.")
        if T < 2 or not math.log(T) > 4.0 * params.beta0 / params.c2:
            raise PreconditionError(
                f"log T > 4 beta0 / c2 violated: T={T!r}, 4 beta0 / c2={4.0 * params.beta0 / params.c2!r}.")
        log_T = math.log(T)
        ceiling = min(params.c2 / 2.0, params.beta0 / log_T)
        if beta <= 0 or beta > ceiling * (1.0 + RATIO_TOLERANCE):
            raise PreconditionError(
                f"0 < beta <= min{{c2/2, beta0/log T}} violated: beta={beta!r}, bound={ceiling!r}.")

        n_max = math.floor(T)
        self.tables.require(n_max, "T")
        all_primes = self.tables.primes_in(0, n_max).tolist()
        self._check_smooth_bound(F, params, all_primes, n_max)
        primes = [p for p in all_primes if c % p != 0]
        weights = self._inverse_weights(F, params, primes)

        log_A = math.log(A)
        log_C_prime = math.log(params.C_prime)
        logs, relative_tail = [], 0.0
        for p in primes:
            log_p = math.log(p)
            candidates = [
                (params.C_prime * float(p) ** params.c1, math.exp((beta - params.c2 / 2.0) * log_p)),
                (float(p) ** params.c1, A * math.exp((beta - params.c2) * log_p)),
            ]
            candidates = [(scale, q) for scale, q in candidates if q < 1.0]
            if not candidates:
                raise DomainError(f"Inner series diverges at p={p}: both geometric ratios are >= 1.")

            def term(e: int) -> float:
                f = F.at_prime_power(p, e)
                if f == 0.0:
                    return 0.0
                log_min = min(log_C_prime + e * params.c2 / 2.0 * log_p, e * log_A)
                return math.exp(log_min + math.log(f)) * math.expm1(beta * e * log_p)

            local, remainder = _geometric_sum(
                term, lambda e: min(s * q ** (e + 1) / (1.0 - q) for s, q in candidates),
                SERIES_TOLERANCE)
            factor = 1.0 + weights[p] * local
            logs.append(math.log(factor))
            relative_tail += weights[p] * remainder / factor

        log_lhs = math.fsum(logs)
        lhs = math.exp(log_lhs)
        rhs = math.exp(beta * log_T)
        return build_report(
            "euler-product", lhs, rhs, {"A": A, "c": c, "beta": beta, "T": T},
            truncation_error=lhs * math.expm1(relative_tail),
            extras={"nu": log_lhs / (beta * log_T)})

    def majorant_check(self, G: ArithmeticFunction, params: EnvelopeParams, sample_limit: int,
                       epsilon: Optional[float] = None) -> ClassReport:
        """G(ab) <= G(a) H(b) over coprime ab <= sample_limit, H(p^e) = min{C^e, C' p^(eps e)}."""
        if sample_limit < 2:
            raise PreconditionError(f"sample_limit must be >= 2, got {sample_limit}.")
        eps = params.c2 / 2.0 if epsilon is None else epsilon
        C, C_prime = params.C, params.C_prime
        values = value_table(G, sample_limit, self.tables)
        majorant = multiplicative_table(
            lambda p, e: min(C**e, C_prime * float(p) ** (eps * e)), sample_limit, self.tables)
        worst, pair, violations, witnesses = coprime_pair_scan(values, majorant, sample_limit)
        logger.debug(f"Majorant check of '{G.name}': worst ratio {worst!r} at {pair}")
        return ClassReport(subject=G.name, conditions=[ConditionResult(
            condition="majorant", passed=violations == 0, slack=worst, witness=pair,
            violations=violations, witnesses=witnesses,
            checked_range=f"coprime a*b <= {sample_limit}, eps={eps:g}",
        )])

    # ==========================================================================
    # SMOOTH SERIES
    # ==========================================================================

    def _tail_preconditions(self, params: EnvelopeParams) -> None:
        if params.Upsilon < 16 or params.Psi < 16:
            raise PreconditionError(
                f"Upsilon >= 16 and Psi >= 16 required, got {params.Upsilon!r}, {params.Psi!r}.")
        if params.C <= 1:
            raise PreconditionError(f"C > 1 required, got {params.C!r}.")

    def _tail_parameters(self, params: EnvelopeParams, a_max: int) -> Dict:
        return {"Upsilon": params.Upsilon, "Psi": params.Psi, "varpi": params.varpi, "a_max": a_max}

    def smooth_series_tail(self, F: ArithmeticFunction, G: ArithmeticFunction,
                           params: EnvelopeParams, a_max: Optional[int] = None) -> LemmaReport:
        """
        lhs = sum over Upsilon < a <= a_max, P+(a) < Psi of F(a) G(a) prod_{c0<p|a} (1 - F(p))^-1;
        envelope = exp(-varpi log Upsilon / log Psi) H(Psi), H cut at a_max like the lhs.
        """
        self._tail_preconditions(params)
        a_max = a_max or settings.a_max
        series = self._smooth_series(F, G, params, params.Psi, a_max, split=params.Upsilon)
        decay = math.exp(-params.varpi * math.log(params.Upsilon) / math.log(params.Psi))
        extras = {"head": series.head, "H_truncated": series.enumerated, "decay": decay}
        if series.euler is not None:
            extras["H_euler"] = series.euler
        return build_report("series-tail", series.tail, decay * series.enumerated,
                            self._tail_parameters(params, a_max),
                            truncation_error=series.truncation, extras=extras)

    def tail_versus_head(self, F: ArithmeticFunction, G: ArithmeticFunction,
                         params: EnvelopeParams, a_max: Optional[int] = None) -> LemmaReport:
        """Same lhs as the series tail; envelope = exp(-varpi log Upsilon / log Psi) sum_{a <= Psi}."""
        self._tail_preconditions(params)
        a_max = a_max or settings.a_max
        series = self._smooth_series(F, G, params, params.Psi, a_max, split=params.Upsilon)

        head_limit = math.floor(params.Psi)
        primes = self.tables.primes_in(0, head_limit).tolist()
        weights = self._inverse_weights(F, params, primes)
        head, _ = self._enumerate_series(F, G, primes, weights, head_limit, split=head_limit)

        decay = math.exp(-params.varpi * math.log(params.Upsilon) / math.log(params.Psi))
        return build_report("tail-vs-head", series.tail, decay * head,
                            self._tail_parameters(params, a_max),
                            truncation_error=series.truncation,
                            extras={"head_sum": head, "decay": decay})

    def smooth_series_ratio(self, F: ArithmeticFunction, G: ArithmeticFunction,
                            params: EnvelopeParams, V: float, epsilon: float,
                            a_max: Optional[int] = None) -> LemmaReport:
        """lhs = H(V), envelope = H(V^eps); implied constant lhs * eps^nu1 / envelope."""
        if epsilon <= 0:
            raise PreconditionError(f"eps > 0 required, got {epsilon!r}.")
        small = V**epsilon
        if not small ** (params.c2 / 2.0) > 2.0 * params.C:
            raise PreconditionError(
                f"V^(eps c2/2) > 2C violated: {small ** (params.c2 / 2.0)!r} <= {2.0 * params.C!r}.")
        if not small > params.c0:
            raise PreconditionError(f"V^eps > c0 violated: {small!r} <= {params.c0!r}.")
        a_max = a_max or settings.a_max

        self._check_smooth_bound(F, params, self.tables.primes_below(V).tolist(), a_max)
        lhs, lhs_error = self._series_value(F, G, params, V, a_max)
        rhs, rhs_error = self._series_value(F, G, params, small, a_max)
        return build_report(
            "series-ratio", lhs, rhs, {"V": V, "epsilon": epsilon, "nu1": params.nu1},
            truncation_error=lhs_error, extras={"rhs_truncation": rhs_error},
            scale=epsilon**params.nu1)

    # ==========================================================================
    # SQUAREFREE SUMS AND PRIME SUMS
    # ==========================================================================

    def squarefree_weighted_sum(self, g: DensityFunction, a: int, alpha2: float,
                                alpha3: float, x: float) -> LemmaReport:
        """
        lhs = sum over squarefree m coprime to a with all prime factors in (alpha1, x^alpha2)
        of g(m) prod_{alpha1<p<=x^alpha3, p!|am} (1 - g(p))^2, taken as its exact Euler product;
        envelope = Cfac prod_{alpha1<p<=x^min(alpha2, alpha3), p!|a} (1 - g(p)).
        """
        if x < 16:
            raise PreconditionError(f"x >= 16 required, got {x!r}.")
        if a < 1 or alpha2 <= 0 or alpha3 <= 0:
            raise PreconditionError(
                f"a >= 1, alpha2 > 0 and alpha3 > 0 required, got {a}, {alpha2!r}, {alpha3!r}.")
        alpha1 = g.params.B
        x2, x3 = x**alpha2, x**alpha3

        # 1. Hypothesis g(p) <= alpha1 / p
        primes = self.tables.primes_in(0, max(x2, x3))
        values = g.at_primes(primes)
        bad = np.nonzero((values < 0) | (values > alpha1 / primes * (1.0 + RATIO_TOLERANCE)))[0]
        if len(bad):
            p = int(primes[bad[0]])
            raise HypothesisViolation(
                f"g({p}) = {float(values[bad[0]])!r} exceeds alpha1/p = {alpha1 / p!r}.", witness=(p,))

        # 2. Primes above alpha1 not dividing a
        keep = (primes > alpha1) & np.array([a % p != 0 for p in primes.tolist()], dtype=bool)
        primes, values = primes[keep], values[keep]
        logs = log_one_minus(values, primes)

        # 3. Exact sum as a product
        squared = primes <= x3
        in_m = primes < x2
        local = np.where(squared, np.log1p(values / (1.0 - values) ** 2), np.log1p(values))
        lhs = math.exp(math.fsum(2.0 * logs[squared]) + math.fsum(local[in_m]))

        # 4. Envelope
        if alpha2 <= alpha3:
            log_factor = 2.0 * math.fsum(logs[(primes > x2) & (primes <= x3)])
        else:
            log_factor = -math.fsum(logs[(primes > x3) & (primes <= x2)])
        base = math.fsum(logs[primes <= min(x2, x3)])
        rhs = math.exp(log_factor + base)
        return build_report("squarefree-sum", lhs, rhs,
                            {"a": a, "alpha2": alpha2, "alpha3": alpha3, "x": x},
                            extras={"C_factor": math.exp(log_factor), "alpha1": alpha1})

    def exp_prime_sum_bound(self, F: ArithmeticFunction, G: ArithmeticFunction,
                            params: EnvelopeParams, x: float) -> LemmaReport:
        """lhs = sum_{n <= x, P-(n) > c0} F(n) G(n); envelope = exp(sum_{c0 < p <= x} F(p) G(p))."""
        if x < 1:
            raise PreconditionError(f"x >= 1 required, got {x!r}.")
        n_max = math.floor(x)
        self.tables.require(n_max, "x")
        primes = self.tables.primes_in(0, n_max)
        self._check_smooth_bound(F, params, primes.tolist(), n_max, squares=True)

        products = value_table(F, n_max, self.tables) * value_table(G, n_max, self.tables)
        keep = self.tables.smallest_prime_factor[: n_max + 1] > params.c0
        keep[0], keep[1] = False, True
        lhs = math.fsum(products[keep].tolist())

        large = primes[primes > params.c0]
        exponent = math.fsum((F.at_primes(large) * G.at_primes(large)).tolist())
        return build_report("exp-prime-sum", lhs, math.exp(exponent), {"x": x},
                            extras={"prime_sum": exponent})

    def prime_weight_inflation(self, F: ArithmeticFunction, G: ArithmeticFunction,
                               params: EnvelopeParams, gamma: float, T: float,
                               c: Optional[Callable[[int], float]] = None) -> LemmaReport:
        """
        lhs = sum_{a<=T} F(a) G(a) prod_{p|a} (1 + c(p)) for 0 <= c(p) <= gamma/p;
        envelope = 2^(gamma gamma') sum_{a<=T} F(a) G(a), an explicit inequality.
        """
        if gamma <= 0:
            raise PreconditionError(f"gamma > 0 required, got {gamma!r}.")
        n_max = math.floor(T)
        if n_max < 1:
            raise PreconditionError(f"T >= 1 required, got {T!r}.")
        self.tables.require(n_max, "T")
        primes = self.tables.primes_in(0, n_max)
        self._check_smooth_bound(F, params, primes.tolist(), n_max)

        # 1. Per-prime weights
        weight = c or (lambda p: gamma / p)
        c_values = np.fromiter((weight(int(p)) for p in primes), dtype=np.float64, count=len(primes))
        bad = np.nonzero((c_values < 0) | (c_values > gamma / primes * (1.0 + RATIO_TOLERANCE)))[0]
        if len(bad):
            p = int(primes[bad[0]])
            raise HypothesisViolation(
                f"c({p}) = {float(c_values[bad[0]])!r} outside [0, gamma/p].", witness=(p,))
        inflation = dict(zip(primes.tolist(), c_values.tolist()))

        # 2. Both sums
        products = value_table(F, n_max, self.tables) * value_table(G, n_max, self.tables)
        factors = multiplicative_table(lambda p, e: 1.0 + inflation[p], n_max, self.tables)
        base = math.fsum(products[1:].tolist())
        lhs = math.fsum((products[1:] * factors[1:]).tolist())

        # 3. Explicit constant
        exponent = 1.0 + 2.0 * (1.0 + params.c1) / params.c2
        gamma_prime = (exponent * params.c0 * params.C**exponent
                       + params.C_prime / (2.0 ** (params.c2 / 2.0) - 1.0))
        rhs = 2.0 ** (gamma * gamma_prime) * base
        return build_report("prime-weight-inflation", lhs, rhs, {"gamma": gamma, "T": T},
                            extras={"gamma_prime": gamma_prime, "base": base,
                                    "holds": 1.0 if lhs <= rhs else 0.0})

    # ==========================================================================
    # SWEEPS
    # ==========================================================================

    def evaluator(self, lemma_id: str) -> Callable[..., LemmaReport]:
        name = LEMMA_IDS.get(lemma_id, lemma_id)
        if name not in LEMMA_IDS.values() or name == "majorant_check":
            raise DomainError(
                f"'{lemma_id}' has no sweepable evaluator (known: {', '.join(k for k in LEMMA_IDS if k != 'majorant')}).")
        return getattr(self, name)

    def sweep(self, lemma_id: str, parameter: str, values: Sequence[float],
              workers: Optional[int] = None, **kwargs) -> List[LemmaReport]:
        """
        Runs one evaluator over a grid of `parameter`, which is either an evaluator
        argument or a field of the `params` keyword. Reports come back ordered by value.
        """
        method = self.evaluator(lemma_id)
        in_params = parameter in EnvelopeParams.model_fields
        if in_params and "params" not in kwargs:
            raise DomainError(f"Sweeping '{parameter}' needs envelope params.")

        def run(value: float) -> LemmaReport:
            if in_params:
                params = EnvelopeParams(**{**kwargs["params"].model_dump(), parameter: value})
                report = method(**{**kwargs, "params": params})
            else:
                report = method(**{**kwargs, parameter: value})
            report.parameters.setdefault(parameter, value)
            return report

        ordered = sorted(values)
        logger.info(f"Lemma sweep {lemma_id}: {parameter} over {len(ordered)} values")
        with ThreadPoolExecutor(max_workers=workers or settings.workers) as pool:
            reports = list(pool.map(run, ordered))
        logger.info(f"Lemma sweep {lemma_id} done: implied constants "
                    f"{[round(r.implied_constant, 6) for r in reports]}")
        return reports
