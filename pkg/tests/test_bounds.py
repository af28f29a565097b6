import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from app.core.exceptions import DomainError, HypothesisViolation
from app.models.bounds import CASE_ORDER, CaseLabel, DecompositionConstants, FlatRoughSplit
from app.models.families import EquidistModel, MChoice
from app.models.functions import DensityParams, GrowthParams
from app.services.arith import factorize, mertens_product
from app.services.bounds import (
    BoundsService, case_ii_diagnostic, classify_case, classify_codes, compute_constants,
    flat_part, flat_part_arrays, split_arrays, split_flat_rough,
)
from app.services.families import default_identity_model, make_identity_family
from app.services.functions import (
    constant_one, constant_over_p_density, divisor_tau, mobius_squared, power_of_big_omega,
    reciprocal_density, zero_beyond_one,
)

WIDE = DecompositionConstants(eta1=0.045, eta2=0.5, eta3=0.5, Z=1e3)


@pytest.fixture(scope="module")
def service(tables):
    return BoundsService(tables)


@pytest.fixture(scope="module")
def largest_prime_factor(tables):
    n_max = 10**5
    table = np.zeros(n_max + 1, dtype=np.int64)
    table[1] = 1
    for p in tables.primes_in(0, n_max).tolist():
        table[p::p] = p
    return table


# ==========================================================================
# CONSTANTS
# ==========================================================================

def test_compute_constants():
    model = EquidistModel(h=reciprocal_density(), theta=0.5, xi=0.9, alpha=1.0)
    params = DensityParams(kappa=1.0, lambda1=1.0, lambda2=0.0, K=1.0)
    consts, lower = compute_constants(model, params, 1e6)
    assert consts.eta1 == pytest.approx(0.045)
    assert consts.eta2 == 0.5
    assert consts.eta3 == pytest.approx(0.125)
    assert consts.Z == pytest.approx(1e6**0.045)
    assert lower.v == pytest.approx(0.125 / (10.0 + math.log(2.0)))
    assert lower.v == pytest.approx(0.011690, abs=1e-6)
    assert lower.v0 == pytest.approx(lower.v / 2)


def test_eta1_scales_with_alpha():
    model = EquidistModel(h=reciprocal_density(), alpha=2.0)
    consts, _ = compute_constants(model, DensityParams(), 1e6)
    assert consts.eta1 == pytest.approx(0.0225)
    assert consts.Z == pytest.approx(1e6**0.045)


def test_small_K_caps_v():
    model = default_identity_model()
    _, lower = compute_constants(model, DensityParams(K=0.1), 1e6)
    assert lower.v == 1.0
    assert lower.v0 == 0.25


# ==========================================================================
# FLAT AND ROUGH PARTS
# ==========================================================================

@pytest.mark.parametrize("c, Z, expected", [
    (60, 10, FlatRoughSplit(d=4, b=15, rough_prime=3)),
    (30, 30, FlatRoughSplit(d=30, b=1)),
    (7, 3, FlatRoughSplit(d=1, b=7, rough_prime=7)),
    (1, 16, FlatRoughSplit(d=1, b=1)),
    (1024, 1000, FlatRoughSplit(d=1, b=1024, rough_prime=2)),
])
def test_split_examples(c, Z, expected, tables):
    assert split_flat_rough(factorize(c, tables), Z) == expected


def test_split_needs_Z_at_least_one(tables):
    with pytest.raises(DomainError):
        split_flat_rough(factorize(6, tables), 0.5)


@pytest.mark.parametrize("Z", [10, 1000])
def test_split_invariants_exhaustively(Z, tables, largest_prime_factor):
    values = np.arange(1, 10**5 + 1, dtype=np.int64)
    d, rough = split_arrays(values, Z, tables)
    b = values // d
    spf = tables.smallest_prime_factor.astype(np.int64)

    assert np.all(d * b == values)
    assert np.all(d <= Z)
    assert np.all(np.gcd(d, b) == 1)
    assert np.all((b == 1) == (rough == 0))

    rough_side = b > 1
    assert np.all(rough[rough_side] == spf[b[rough_side]])
    assert np.all(largest_prime_factor[d[rough_side]] < rough[rough_side])

    # maximality: the next full prime power no longer fits
    p = rough[rough_side]
    q = p.copy()
    rest = b[rough_side] // p
    more = rest % p == 0
    while more.any():
        rest[more] //= p[more]
        q[more] *= p[more]
        more = rest % p == 0
    assert np.all(d[rough_side] * q > Z)


@hsettings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=10**5), st.sampled_from([16.0, 100.0, 1000.0, 10**5]))
def test_vectorised_split_matches_scalar(tables, c, Z):
    split = split_flat_rough(factorize(c, tables), Z)
    d, rough = split_arrays(np.array([c]), Z, tables)
    assert int(d[0]) == split.d
    assert int(rough[0]) == (split.rough_prime or 0)


def test_split_beyond_the_table(tables):
    big = 2**5 * 1000003
    d, rough = split_arrays(np.array([big, 12]), 100, tables)
    assert d.tolist() == [32, 12]
    assert rough.tolist() == [1000003, 0]


def test_flat_part(tables):
    assert flat_part(factorize(60, tables), 4) == 4
    assert flat_part(factorize(60, tables), 5) == 60
    values = np.arange(1, 10**4 + 1)
    flat = flat_part_arrays(values, 10, tables)
    rest = values // flat
    assert np.all(values % flat == 0)
    assert np.all((rest == 1) | (tables.smallest_prime_factor[rest] > 10))


# ==========================================================================
# CASES
# ==========================================================================

@pytest.mark.parametrize("c, expected", [
    (2 * 37, CaseLabel.I),
    (2**11, CaseLabel.II),
    (64 * 9 * 5, CaseLabel.III),
    (2 * 3 * 5 * 7 * 11, CaseLabel.III),
    (64 * 17, CaseLabel.IV),
    (64 * 37, CaseLabel.I),
])
def test_case_examples(c, expected, tables):
    split = split_flat_rough(factorize(c, tables), WIDE.Z)
    assert classify_case(split, WIDE.Z, WIDE) == expected


def test_standard_constants_at_Z_1000(tables):
    consts = DecompositionConstants(eta1=0.045, eta2=0.5, eta3=0.125, Z=1e3)
    split = split_flat_rough(factorize(2**10, tables), consts.Z)
    assert classify_case(split, consts.Z, consts) == CaseLabel.II
    split = split_flat_rough(factorize(2 * 997, tables), consts.Z)
    assert classify_case(split, consts.Z, consts) == CaseLabel.I


def test_classification_needs_Z_16(tables):
    split = split_flat_rough(factorize(6, tables), 10)
    with pytest.raises(DomainError, match="16"):
        classify_case(split, 10, WIDE)


def test_cases_partition_every_value(tables):
    values = np.arange(1, 10**5 + 1, dtype=np.int64)
    d, rough = split_arrays(values, WIDE.Z, tables)
    codes = classify_codes(d, rough, WIDE.Z, WIDE)
    assert set(np.unique(codes).tolist()) <= {0, 1, 2, 3}
    counts = np.bincount(codes, minlength=4)
    assert counts.sum() == len(values)
    assert all(count > 0 for count in counts)
    for c in (74, 2048, 2880, 1088, 2310, 99991):
        split = split_flat_rough(factorize(c, tables), WIDE.Z)
        assert CASE_ORDER[codes[c - 1]] == classify_case(split, WIDE.Z, WIDE)


def test_case_ii_diagnostic():
    model = default_identity_model()
    diagnostic = case_ii_diagnostic(model, WIDE, 1e4)
    rows = {row.q: row for row in diagnostic.rows}
    assert list(rows) == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31]
    assert (rows[2].m_q, rows[2].n_q, rows[2].f_q) == (5, 6, 5)
    assert rows[2].h_q_fq == pytest.approx(1 / 32)
    assert (rows[3].m_q, rows[3].n_q, rows[3].f_q) == (4, 4, 4)
    assert (rows[5].m_q, rows[5].n_q, rows[5].f_q) == (3, 2, 2)
    assert (rows[31].m_q, rows[31].n_q, rows[31].f_q) == (2, 1, 1)
    assert diagnostic.total == pytest.approx(math.fsum(r.h_q_fq for r in diagnostic.rows))


# ==========================================================================
# BOTH SIDES
# ==========================================================================

def test_lhs_sums(identity_family, service):
    assert service.lhs_sum(identity_family, divisor_tau(), 10) == 27.0
    T = 10**6
    root = math.isqrt(T)
    hyperbola = 2 * sum(T // d for d in range(1, root + 1)) - root * root
    assert service.lhs_sum(identity_family, divisor_tau(), T) == hyperbola


def test_upper_rhs_small_case(identity_family, service):
    harmonic = math.fsum(1 / n for n in range(1, 11))
    assert service.upper_bound_rhs(identity_family, constant_one(), 10) == pytest.approx(10 * 8 / 35 * harmonic)
    assert service.upper_bound_rhs(identity_family, constant_one(), 10) == pytest.approx(6.6947, rel=1e-4)


def test_upper_rhs_of_zero_function(identity_family, service, tables):
    rhs = service.upper_bound_rhs(identity_family, zero_beyond_one(), 100)
    assert rhs == pytest.approx(100 * mertens_product(reciprocal_density(), 0, 100, tables), rel=1e-12)


def test_upper_exceeds_lower_when_B_exempts_primes(service):
    model = EquidistModel(h=reciprocal_density(DensityParams(B=3.0)))
    fam = make_identity_family(model=model)
    assert service.upper_bound_rhs(fam, constant_one(), 1000) > service.lower_bound_rhs(fam, constant_one(), 1000)


def test_lower_bound_absent_when_product_degenerates(service):
    model = EquidistModel(h=constant_over_p_density(2.0, DensityParams(B=2.0)))
    fam = make_identity_family(model=model)
    report = service.bound_report(fam, constant_one(), 1000)
    assert report.rhs_lower is None
    assert report.ratio_lower is None
    assert report.rhs_upper > 0


def test_lower_bound_absent_when_f_vanishes_on_small_omega(identity_family, service):
    # mu^2(4) = 0 with Omega(4) = 2
    [report] = service.bound_scan(identity_family, mobius_squared(), [1e4])
    assert report.rhs_lower is None
    assert report.ratio_lower is None
    assert report.ratio_upper > 0

    # Omega(m) <= 1 only sees 1 and the primes
    relaxed = service.bound_report(identity_family, mobius_squared(), 1e4, L=1)
    assert relaxed.ratio_lower is not None and relaxed.ratio_lower > 0


@pytest.mark.parametrize("f, low, high, spread", [
    (constant_one(), 1.0, 3.0, 0.10),
    (divisor_tau(), 1.0, 10.0, 0.20),
])
def test_bound_scan_ratios_stay_bounded(f, low, high, spread, identity_family, service):
    reports = service.bound_scan(identity_family, f, [1e6, 1e4, 1e5],
                                 growth=GrowthParams(A=2.0, epsilon=1.0, C=2.0))
    assert [r.T for r in reports] == [1e4, 1e5, 1e6]
    ratios = [r.ratio_upper for r in reports]
    assert all(low <= r <= high for r in ratios)
    assert (max(ratios) - min(ratios)) / min(ratios) < spread
    for r in reports:
        assert r.ratio_lower == pytest.approx(r.ratio_upper)
        assert r.ratio_lower >= 0.5


def test_ratio_values_for_constant_one(identity_family, service):
    reports = service.bound_scan(identity_family, constant_one(), [1e4, 1e6])
    assert reports[0].ratio_upper == pytest.approx(1.68, abs=0.02)
    assert reports[1].ratio_upper == pytest.approx(1.71, abs=0.02)


def test_case_contributions_add_up(identity_family, service):
    report = service.bound_report(identity_family, divisor_tau(), 1e6)
    contributions = report.case_contributions
    assert math.fsum(contributions.values()) == pytest.approx(report.lhs, rel=1e-9)
    share = (contributions[CaseLabel.II] + contributions[CaseLabel.III]) / report.lhs
    assert share < 0.05
    assert contributions[CaseLabel.I] / report.lhs > 0.9
    assert report.Z_cls == 16.0


def test_bound_scan_is_independent_of_thread_count(identity_family, service):
    grid = [1e3, 1e4, 1e5]
    serial = service.bound_scan(identity_family, divisor_tau(), grid, workers=1)
    threaded = service.bound_scan(identity_family, divisor_tau(), grid, workers=3)
    assert [r.model_dump() for r in serial] == [r.model_dump() for r in threaded]


def test_bound_scan_checks_growth(identity_family, service):
    with pytest.raises(HypothesisViolation, match="growth"):
        service.bound_scan(identity_family, power_of_big_omega(2.0), [1e3],
                           growth=GrowthParams(A=2.0, epsilon=0.1, C=1.0))


def test_case_table(identity_family, service):
    table = service.case_table(identity_family, divisor_tau(), 1e4)
    assert sum(case.count for case in table.cases) == 10**4
    assert math.fsum(case.share for case in table.cases) == pytest.approx(1.0)
    assert [case.case for case in table.cases] == CASE_ORDER
    # z = M^v is below 2 here, so every flat part is 1
    assert table.lhs_flat == table.lhs


def test_flat_restricted_lhs_drops_flat_values(service):
    model = EquidistModel(h=reciprocal_density(DensityParams(K=0.1)), m_choice=MChoice.TOTAL)
    fam = make_identity_family(model=model)
    # v = 1 and v0 = 1/4: keep n whose full value stays <= M^(1/4) = 10
    assert service.flat_restricted_lhs(fam, constant_one(), 1e4) == float(math.floor(1e4**0.25))
