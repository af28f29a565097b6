import itertools
import math

import pytest
from pydantic import ValidationError

from app.core.exceptions import DomainError, HypothesisViolation, PreconditionError
from app.models.functions import ArithmeticFunction, DensityParams, FunctionKind
from app.models.lemmas import EnvelopeParams
from app.services.functions import (
    constant_one, constant_over_p_density, divisor_tau, power_of_big_omega,
    prime_scaled, reciprocal_density, reciprocal_power, smooth_density, zero_beyond_one,
)
from app.services.lemmas import LEMMA_IDS, LemmaLabService, build_report

PRIMES_BELOW_30 = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


@pytest.fixture(scope="module")
def lab(tables):
    return LemmaLabService(tables)


def test_build_report_conventions():
    assert build_report("sample", 0.0, 0.0, {}).implied_constant == 0.0
    assert build_report("sample", 2.0, 4.0, {}, scale=0.5).implied_constant == 0.25
    with pytest.raises(DomainError, match="vanishes"):
        build_report("sample", 1.0, 0.0, {})


def test_envelope_params_bound_varpi():
    with pytest.raises(ValidationError, match="varpi"):
        EnvelopeParams(varpi=2.0)


# ==========================================================================
# SMOOTH TAILS
# ==========================================================================

def test_smooth_tail_report(lab):
    report = lab.smooth_tail(smooth_density(), EnvelopeParams(), 1e5, 100)
    assert report.lhs > 0
    assert math.isfinite(report.implied_constant)
    assert report.extras["c"] == pytest.approx(1 / 3)
    assert report.extras["c_prime"] == pytest.approx(9.0)


def test_smooth_tail_is_empty_past_x(lab):
    report = lab.smooth_tail(smooth_density(), EnvelopeParams(), 1e5, 1e5)
    assert report.lhs == 0.0
    assert report.implied_constant == 0.0


def test_smooth_tail_constant_is_stable_in_z(lab):
    reports = lab.sweep("smooth-tail", "z", [1000.0, 100.0], F=smooth_density(),
                        params=EnvelopeParams(), x=1e5)
    assert [r.parameters["z"] for r in reports] == [100.0, 1000.0]
    low, high = (r.implied_constant for r in reports)
    assert high / low < 3.0 and low / high < 3.0


def test_smooth_tail_preconditions(lab):
    with pytest.raises(PreconditionError):
        lab.smooth_tail(smooth_density(), EnvelopeParams(), 10, 100)
    with pytest.raises(HypothesisViolation) as info:
        lab.smooth_tail(constant_one(), EnvelopeParams(), 1e4, 100)
    assert info.value.witness == (2, 1)


# ==========================================================================
# EULER PRODUCT
# ==========================================================================

def test_euler_product_of_zero_function(lab):
    report = lab.euler_product_bound(zero_beyond_one(), EnvelopeParams(), A=2.0, c=1, beta=1e-9, T=1e3)
    assert report.lhs == 1.0
    assert report.rhs_envelope == pytest.approx(1.0, abs=1e-6)


def test_euler_product_excludes_primes_of_c(lab):
    params = EnvelopeParams(C_prime=1.0)
    beta = 1.0 / math.log(1e3)
    full = lab.euler_product_bound(smooth_density(), params, A=2.0, c=1, beta=beta, T=1e3)
    reduced = lab.euler_product_bound(smooth_density(), params, A=2.0, c=6, beta=beta, T=1e3)
    assert 1.0 < reduced.lhs < full.lhs
    assert math.isfinite(full.extras["nu"])
    assert full.truncation_error >= 0


def test_euler_product_preconditions(lab):
    with pytest.raises(PreconditionError, match="A > 1"):
        lab.euler_product_bound(smooth_density(), EnvelopeParams(), A=1.0, c=1, beta=0.1, T=1e3)
    with pytest.raises(PreconditionError, match="beta"):
        lab.euler_product_bound(smooth_density(), EnvelopeParams(), A=2.0, c=1, beta=0.4, T=1e3)
    with pytest.raises(PreconditionError, match="log T"):
        lab.euler_product_bound(smooth_density(), EnvelopeParams(), A=2.0, c=1, beta=0.1, T=20)


def test_majorant(lab):
    assert lab.majorant_check(divisor_tau(), EnvelopeParams(C=2.0, C_prime=2.0), 1000, epsilon=1.0).passed
    failing = lab.majorant_check(power_of_big_omega(3.0), EnvelopeParams(C=2.0, C_prime=1.0), 1000,
                                 epsilon=0.1)
    assert not failing.passed
    assert failing.witness is not None


# ==========================================================================
# SMOOTH SERIES
# ==========================================================================

SERIES_PARAMS = EnvelopeParams(Upsilon=1e3, Psi=1e2)


def test_series_tail(lab):
    report = lab.smooth_series_tail(reciprocal_power(), constant_one(), SERIES_PARAMS, a_max=10**6)
    assert report.lhs > 0
    assert report.extras["head"] + report.lhs == pytest.approx(report.extras["H_truncated"])
    assert report.extras["H_euler"] >= report.extras["H_truncated"]
    assert report.extras["decay"] == pytest.approx(math.exp(-1.5))
    assert math.isfinite(report.implied_constant)


def test_series_tail_truncation_bounds_what_is_left(lab):
    short = lab.smooth_series_tail(reciprocal_power(), constant_one(), SERIES_PARAMS, a_max=10**6)
    long = lab.smooth_series_tail(reciprocal_power(), constant_one(), SERIES_PARAMS, a_max=2 * 10**6)
    assert 0 <= long.lhs - short.lhs <= short.truncation_error + 1e-12


def test_series_tail_constant_is_stable_in_upsilon(lab):
    reports = lab.sweep("series-tail", "Upsilon", [1e3, 1e4], F=reciprocal_power(), G=constant_one(),
                        params=SERIES_PARAMS, a_max=10**6)
    low, high = (r.implied_constant for r in reports)
    assert reports[1].parameters["Upsilon"] == 1e4
    assert high / low < 3.0 and low / high < 3.0


def test_series_tail_empty_beyond_a_max(lab):
    params = EnvelopeParams(Upsilon=1e6, Psi=1e2)
    report = lab.smooth_series_tail(reciprocal_power(), constant_one(), params, a_max=10**6)
    assert report.lhs == 0.0
    assert report.implied_constant == 0.0


def test_series_tail_with_pointwise_weight_uses_rankin_tail(lab):
    parity = ArithmeticFunction(name="odd", kind=FunctionKind.POINTWISE, evaluator=lambda n: float(n % 2))
    report = lab.smooth_series_tail(reciprocal_power(), parity, SERIES_PARAMS, a_max=10**5)
    assert "H_euler" not in report.extras
    assert report.truncation_error > 0


def test_tail_versus_head(lab):
    report = lab.tail_versus_head(reciprocal_power(), constant_one(), SERIES_PARAMS, a_max=10**6)
    assert report.extras["head_sum"] > 1.0
    assert math.isfinite(report.implied_constant)


def test_series_ratio(lab):
    report = lab.smooth_series_ratio(reciprocal_power(), constant_one(), EnvelopeParams(), V=1e4,
                                     epsilon=0.5, a_max=10**6)
    assert report.lhs > report.rhs_envelope > 1.0
    assert report.implied_constant == pytest.approx(0.5 * report.lhs / report.rhs_envelope)

    same = lab.smooth_series_ratio(reciprocal_power(), constant_one(), EnvelopeParams(), V=1e4,
                                   epsilon=1.0, a_max=10**6)
    assert same.implied_constant == pytest.approx(1.0)


def test_series_ratio_preconditions(lab):
    with pytest.raises(PreconditionError, match="2C"):
        lab.smooth_series_ratio(reciprocal_power(), constant_one(), EnvelopeParams(), V=1e4,
                                epsilon=0.1, a_max=10**6)


# ==========================================================================
# SQUAREFREE AND PRIME SUMS
# ==========================================================================

def test_squarefree_sum_against_subsets(lab):
    report = lab.squarefree_weighted_sum(reciprocal_density(), a=1, alpha2=0.5, alpha3=0.5, x=900)
    oracle = 0.0
    for size in range(len(PRIMES_BELOW_30) + 1):
        for subset in itertools.combinations(PRIMES_BELOW_30, size):
            m = math.prod(subset)
            rest = math.prod((1 - 1 / p) ** 2 for p in PRIMES_BELOW_30 if p not in subset)
            oracle += rest / m
    assert report.lhs == pytest.approx(oracle, rel=1e-12)
    assert report.extras["C_factor"] == 1.0


def test_squarefree_sum_with_all_small_primes_in_a(lab):
    a = math.prod(PRIMES_BELOW_30)
    report = lab.squarefree_weighted_sum(reciprocal_density(), a=a, alpha2=0.5, alpha3=0.5, x=900)
    assert report.lhs == 1.0
    assert report.rhs_envelope == 1.0


def test_squarefree_sum_hypothesis(lab):
    g = constant_over_p_density(2.0, DensityParams(B=1.0))
    with pytest.raises(HypothesisViolation) as info:
        lab.squarefree_weighted_sum(g, a=1, alpha2=0.5, alpha3=0.5, x=1e4)
    assert info.value.witness == (2,)


def test_exp_prime_sum(lab):
    x = 10**5
    report = lab.exp_prime_sum_bound(reciprocal_power(), constant_one(), EnvelopeParams(), x)
    harmonic = math.fsum(1.0 / n for n in range(1, x + 1))
    assert report.lhs == pytest.approx(harmonic, rel=1e-9)
    assert 0.5 < report.implied_constant < 1.0

    doubled = lab.exp_prime_sum_bound(reciprocal_power(), prime_scaled(constant_one(), 2.0),
                                      EnvelopeParams(), x)
    assert doubled.rhs_envelope == pytest.approx(report.rhs_envelope**2, rel=1e-9)


def test_exp_prime_sum_with_smooth_density(lab):
    x = 10**4
    report = lab.exp_prime_sum_bound(smooth_density(), constant_one(), EnvelopeParams(c3=x), x)
    assert report.lhs > 1.0
    with pytest.raises(HypothesisViolation):
        lab.exp_prime_sum_bound(smooth_density(), constant_one(), EnvelopeParams(), x)


def test_exp_prime_sum_of_zero_function(lab):
    report = lab.exp_prime_sum_bound(zero_beyond_one(), constant_one(), EnvelopeParams(), 1000)
    assert report.lhs == 1.0
    assert report.rhs_envelope == 1.0


def test_prime_weight_inflation(lab):
    report = lab.prime_weight_inflation(reciprocal_power(), constant_one(), EnvelopeParams(), gamma=1.0, T=1e4)
    assert report.extras["holds"] == 1.0
    assert report.lhs > report.extras["base"]
    assert report.implied_constant < 1.0
    with pytest.raises(HypothesisViolation):
        lab.prime_weight_inflation(reciprocal_power(), constant_one(), EnvelopeParams(), gamma=1.0, T=1e4,
                                   c=lambda p: 2.0 / p)


# ==========================================================================
# SWEEPS
# ==========================================================================

def test_sweep_is_independent_of_thread_count(lab):
    kwargs = dict(F=reciprocal_power(), G=constant_one(), params=EnvelopeParams())
    serial = lab.sweep("exp-prime-sum", "x", [1e3, 1e4, 1e2], workers=1, **kwargs)
    threaded = lab.sweep("exp-prime-sum", "x", [1e3, 1e4, 1e2], workers=3, **kwargs)
    assert [r.model_dump() for r in serial] == [r.model_dump() for r in threaded]
    assert [r.parameters["x"] for r in serial] == [1e2, 1e3, 1e4]


def assert_stable_per_decade(reports):
    constants = [r.implied_constant for r in reports]
    assert all(math.isfinite(k) and k > 0 for k in constants), constants
    for low, high in zip(constants, constants[1:]):
        assert high / low < 3.0 and low / high < 3.0, constants


@pytest.mark.parametrize("lemma_id, parameter, values, kwargs", [
    ("series-tail", "Upsilon", [1e3, 1e4], dict(params=SERIES_PARAMS, a_max=10**6)),
    ("tail-vs-head", "Upsilon", [1e3, 1e4], dict(params=SERIES_PARAMS, a_max=10**6)),
    ("exp-prime-sum", "x", [1e4, 1e5], dict(params=EnvelopeParams(c3=1e5))),
], ids=["series-tail", "tail-vs-head", "exp-prime-sum"])
@pytest.mark.parametrize("G", [constant_one(), divisor_tau()], ids=["one", "tau"])
def test_weighted_constants_are_stable_per_decade(lab, lemma_id, parameter, values, kwargs, G):
    reports = lab.sweep(lemma_id, parameter, values, F=smooth_density(), G=G, **kwargs)
    assert_stable_per_decade(reports)


@pytest.mark.parametrize("lemma_id, parameter, values, kwargs", [
    ("smooth-tail", "z", [100.0, 1000.0], dict(F=smooth_density(), params=EnvelopeParams(), x=1e5)),
    ("squarefree-sum", "x", [1e4, 1e5, 1e6], dict(g=reciprocal_density(), a=1, alpha2=0.5, alpha3=0.5)),
], ids=["smooth-tail", "squarefree-sum"])
def test_unweighted_constants_are_stable_per_decade(lab, lemma_id, parameter, values, kwargs):
    assert_stable_per_decade(lab.sweep(lemma_id, parameter, values, **kwargs))


def test_evaluator_lookup(lab):
    assert set(LEMMA_IDS) >= {"smooth-tail", "series-tail", "squarefree-sum"}
    with pytest.raises(DomainError):
        lab.evaluator("majorant")
    with pytest.raises(DomainError):
        lab.evaluator("nope")
