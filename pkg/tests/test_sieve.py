import math

import pytest

from app.core.exceptions import DegenerateProductError, DomainError, PreconditionError
from app.models.families import EquidistModel
from app.models.functions import DensityFunction, DensityParams
from app.models.sieve import SieveSide
from app.services.families import make_identity_family
from app.services.functions import constant_over_p_density, reciprocal_density
from app.services.sieve import (
    SieveService, build_weights, default_beta, lower_sieve_estimate,
    main_term_accuracy, verify_properties,
)


# ==========================================================================
# WEIGHTS
# ==========================================================================

@pytest.mark.parametrize("side", [SieveSide.UPPER, SieveSide.LOWER])
@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("z", [10, 50, 100])
@pytest.mark.parametrize("sigma", [2, 3])
def test_weights_satisfy_their_properties(side, kappa, z, sigma):
    w = build_weights(kappa, z**sigma, z, side)
    check = verify_properties(w, 100_000)
    assert check.passed, [r for r in check.results if r.violations]
    assert {r.name for r in check.results} == {"unit", "bounded", "cutoff", "sandwich", "coprime_exact"}


def test_weights_are_mobius_on_small_support():
    w = build_weights(1.0, 10**6, 10, SieveSide.UPPER)
    assert w[1] == 1
    assert w[2] == -1
    assert w[6] == 1
    assert w[210] == 1
    assert w[4] == 0


def test_upper_weights_sum_nonnegative_over_divisors():
    w = build_weights(1.0, 125, 5, SieveSide.UPPER)
    assert sum(w[m] for m in (1, 2, 3, 5, 6, 10, 15, 30)) >= 0


def test_trivial_sifting_range():
    w = build_weights(1.0, 100, 2, SieveSide.UPPER)
    assert w.weights == {1: 1}
    assert verify_properties(w, 1000).passed


def test_default_beta():
    assert default_beta(0.5) == 3
    assert default_beta(1.0) == 3
    assert default_beta(2.5) == 7


def test_weights_reject_degenerate_ranges():
    with pytest.raises(DomainError):
        build_weights(1.0, 1.0, 10, SieveSide.UPPER)
    with pytest.raises(DomainError, match="max_sieve_weights"):
        build_weights(1.0, 10**9, 200, SieveSide.LOWER, max_weights=100)


# ==========================================================================
# ACCURACY
# ==========================================================================

def test_accuracy_improves_with_sigma():
    f = reciprocal_density()
    errors = [main_term_accuracy(build_weights(1.0, 100**sigma, 100, SieveSide.UPPER), f).relative_error
              for sigma in (2, 3, 4, 5)]
    assert all(later < earlier for earlier, later in zip(errors, errors[1:])), errors
    assert errors[1] < 0.5
    assert errors[3] < 0.01


def test_accuracy_reference_is_the_product():
    result = main_term_accuracy(build_weights(1.0, 10**4, 10, SieveSide.UPPER), reciprocal_density())
    assert result.reference == pytest.approx(8 / 35, rel=1e-12)
    assert result.sigma == pytest.approx(4.0)


def test_accuracy_of_vanishing_density():
    zero = DensityFunction(name="zero", rule=lambda p, e: 0.0)
    result = main_term_accuracy(build_weights(1.0, 10**4, 100, SieveSide.UPPER), zero)
    assert result.sum == 1.0
    assert result.reference == 1.0
    assert result.relative_error == 0.0


def test_accuracy_rejects_density_reaching_one():
    w = build_weights(1.0, 10**4, 10, SieveSide.UPPER)
    with pytest.raises(DegenerateProductError) as info:
        main_term_accuracy(w, constant_over_p_density(2.0))
    assert info.value.prime == 2


def test_lower_estimate():
    f = reciprocal_density()
    estimate = lower_sieve_estimate(build_weights(1.0, 10**6, 100, SieveSide.LOWER), f, K=2.0)
    assert estimate.holds
    assert estimate.sum >= estimate.floor
    with pytest.raises(DomainError, match="lower-side"):
        lower_sieve_estimate(build_weights(1.0, 10**6, 100, SieveSide.UPPER), f, K=2.0)


# ==========================================================================
# SIFTED SUMS
# ==========================================================================

@pytest.fixture(scope="module")
def sifted_family():
    model = EquidistModel(h=reciprocal_density(DensityParams(K=0.5)), theta=0.5, xi=0.9)
    return make_identity_family(model=model)


def test_sifted_sum_exact_count(sifted_family, tables):
    result = SieveService(tables).sifted_sum_upper(sifted_family, 1, 10**4, 0.25)
    oracle = sum(1 for n in range(1, 10**4 + 1) if math.gcd(n, 210) == 1)
    assert oracle == 2285
    assert result.exact == oracle
    assert result.gamma == pytest.approx(4.0)
    assert result.exact <= result.bound


def test_sifted_sum_with_divisor(sifted_family, tables):
    result = SieveService(tables).sifted_sum_upper(sifted_family, 3, 10**6, 1 / 3)
    assert 0 < result.exact <= result.bound
    assert result.ratio < 5.0


def test_sifted_sum_preconditions(sifted_family, tables):
    service = SieveService(tables)
    with pytest.raises(PreconditionError, match="xi4"):
        service.sifted_sum_upper(sifted_family, 1, 10**4, 0.0)
    with pytest.raises(PreconditionError, match="b <= M"):
        service.sifted_sum_upper(sifted_family, 1000, 10**4, 0.25)
    with pytest.raises(PreconditionError, match="log M"):
        service.sifted_sum_upper(sifted_family, 1, 100, 0.25)
