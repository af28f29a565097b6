import math
from functools import lru_cache
from typing import Callable, Iterator, List, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.exceptions import DegenerateProductError, DomainError, PreconditionError
from app.models.arith import FactoredInteger
from app.models.functions import DensityFunction

INT64_MAX = 2**63 - 1


class PrimeTables:
    """
    Smallest-prime-factor sieve and the list of primes up to `limit`.
    Read-only after construction, so one instance is shared across threads.
    """

    def __init__(self, limit: int):
        if limit < 2:
            raise DomainError(f"Prime table limit must be >= 2, got {limit}.")
        self.limit = int(limit)

        dtype = np.int32 if limit < 2**31 else np.int64
        spf = np.zeros(self.limit + 1, dtype=dtype)
        for p in range(2, math.isqrt(self.limit) + 1):
            if spf[p] == 0:
                block = spf[p * p::p]
                block[block == 0] = p
        primes = np.nonzero(spf == 0)[0]
        primes = primes[primes >= 2].astype(np.int64)
        spf[primes] = primes

        spf.flags.writeable = False
        primes.flags.writeable = False
        self.smallest_prime_factor = spf
        self.primes = primes
        self._prime_list: List[int] | None = None
        logger.debug(f"Prime tables built up to {self.limit}: {len(primes)} primes")

    @property
    def prime_list(self) -> List[int]:
        if self._prime_list is None:
            self._prime_list = self.primes.tolist()
        return self._prime_list

    def is_prime(self, n: int) -> bool:
        if n < 2:
            return False
        self.require(n)
        return int(self.smallest_prime_factor[n]) == n

    def require(self, bound: float, what: str = "bound") -> None:
        if bound > self.limit:
            raise PreconditionError(
                f"{what} = {bound!r} exceeds the prime table limit {self.limit}; "
                "raise prime_limit."
            )

    def primes_in(self, lower: float, upper: float) -> np.ndarray:
        """Primes p with lower < p <= upper."""
        if upper < 2 or upper <= lower:
            return self.primes[:0]
        self.require(upper, "upper")
        lo = np.searchsorted(self.primes, math.floor(lower), side="right") if lower >= 0 else 0
        hi = np.searchsorted(self.primes, math.floor(upper), side="right")
        return self.primes[lo:hi]

    def primes_below(self, z: float) -> np.ndarray:
        """Primes p with p < z."""
        hi = math.ceil(z) - 1
        return self.primes_in(0, hi) if hi >= 2 else self.primes[:0]


# ==========================================================================
# FACTORIZATION
# ==========================================================================

def _strip_with_table(n: int, spf: np.ndarray, out: List[Tuple[int, int]]) -> None:
    while n > 1:
        p = int(spf[n])
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        out.append((p, e))


def factor_pairs(n: int, tables: PrimeTables) -> List[Tuple[int, int]]:
    """Prime-power pairs of n without building a model."""
    if n < 1:
        raise DomainError(f"Cannot factorize {n}: expected a positive integer.")
    if n > INT64_MAX or n > tables.limit**2:
        raise DomainError(
            f"Cannot factorize {n}: outside the supported range (<= {tables.limit}^2)."
        )
    pairs: List[Tuple[int, int]] = []
    if n <= tables.limit:
        _strip_with_table(n, tables.smallest_prime_factor, pairs)
        return pairs

    # Trial division by stored primes until the cofactor drops into the table
    for p in tables.prime_list:
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            pairs.append((p, e))
            if n <= tables.limit:
                rest: List[Tuple[int, int]] = []
                _strip_with_table(n, tables.smallest_prime_factor, rest)
                return pairs + rest
    if n > 1:
        pairs.append((n, 1))
    return pairs


def factorize(n: int, tables: PrimeTables) -> FactoredInteger:
    return FactoredInteger(value=n, factors=tuple(factor_pairs(n, tables)))


def psi_beta(d: FactoredInteger, beta: float) -> float:
    """
    Multiplicative inverse-convolution weight with sum_{d|m} psi(d) = m^beta,
    psi(p^m) = p^(beta m) - p^(beta (m-1)).
    """
    if beta < 0:
        raise DomainError(f"psi_beta needs beta >= 0, got {beta}.")
    value = 1.0
    for p, e in d.factors:
        value *= p ** (beta * e) - p ** (beta * (e - 1))
    return value


# ==========================================================================
# EULER PRODUCTS
# ==========================================================================

def log_one_minus(values: np.ndarray, primes: np.ndarray) -> np.ndarray:
    """log(1 - h(p)) elementwise; raises on the first h(p) >= 1."""
    bad = np.nonzero(values >= 1.0)[0]
    if len(bad):
        i = int(bad[0])
        raise DegenerateProductError(int(primes[i]), float(values[i]))
    return np.log1p(-values)


def mertens_product(h: DensityFunction, lower: float, upper: float,
                    tables: PrimeTables) -> float:
    """Product of (1 - h(p)) over primes lower < p <= upper, summed in log space."""
    primes = tables.primes_in(lower, upper)
    if len(primes) == 0:
        return 1.0
    logs = log_one_minus(h.at_primes(primes), primes)
    return float(np.exp(logs.sum()))


# ==========================================================================
# TABLES OF ARITHMETIC FUNCTIONS
# ==========================================================================

def multiplicative_table(rule: Callable[[int, int], float], n_max: int,
                         tables: PrimeTables) -> np.ndarray:
    """
    Values f(0..n_max) of the multiplicative function with prime-power rule `rule`
    (f(0) is set to 0). One strided pass per prime.
    """
    tables.require(n_max, "table size")
    values = np.ones(n_max + 1, dtype=np.float64)
    values[0] = 0.0
    root = math.isqrt(n_max)
    for p in tables.primes_in(0, n_max).tolist():
        first = float(rule(p, 1))
        if p > root:
            values[p::p] *= first
            continue
        view = values[p::p]
        factors = np.full(len(view), first)
        step = p
        e = 2
        while step * p <= n_max:
            # positions k with (k + 1) divisible by p^(e - 1) hold multiples of p^e
            factors[step - 1::step] = float(rule(p, e))
            step *= p
            e += 1
        view *= factors
    return values


def big_omega_table(n_max: int, tables: PrimeTables) -> np.ndarray:
    tables.require(n_max, "table size")
    omega = np.zeros(n_max + 1, dtype=np.int16)
    for p in tables.primes_in(0, n_max).tolist():
        q = p
        while q <= n_max:
            omega[q::q] += 1
            q *= p
    return omega


def coprime_mask(values: np.ndarray, primes: Sequence[int]) -> np.ndarray:
    """True where a value has no prime factor in `primes`."""
    mask = np.ones(len(values), dtype=bool)
    for p in primes:
        mask &= (values % p) != 0
    return mask


# ==========================================================================
# SMOOTH NUMBERS
# ==========================================================================

def iter_smooth(primes: Sequence[int], bound: int,
                local: Callable[[int, int], float]) -> Iterator[Tuple[int, float]]:
    """
    Yields (a, w(a)) for every a <= bound whose prime factors all lie in `primes`
    (sorted ascending), where w is multiplicative with w(p^e) = local(p, e).
    Order is depth-first, not increasing.
    """
    yield 1, 1.0
    if bound < 2:
        return
    cache = {}
    stack = [(1, 1.0, 0)]
    count = len(primes)
    while stack:
        a, w, start = stack.pop()
        for i in range(start, count):
            p = primes[i]
            if a * p > bound:
                break
            q, e = p, 1
            while a * q <= bound:
                key = (p, e)
                factor = cache.get(key)
                if factor is None:
                    factor = cache[key] = float(local(p, e))
                value = w * factor
                yield a * q, value
                stack.append((a * q, value, i + 1))
                q *= p
                e += 1


@lru_cache(maxsize=32)
def small_primes(n: int) -> Tuple[int, ...]:
    """Primes <= n, for parameters that do not need the shared tables."""
    if n < 2:
        return ()
    return tuple(PrimeTables(n).prime_list)
