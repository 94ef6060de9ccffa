import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvcs.deformed_algebra import (Burban, Canonical, CustomTable, MultiParam, PQParams,
                                   basic_factorial, basic_number, basic_numbers,
                                   deformation_from_dict, f_value, generalized_exponential,
                                   log_basic_factorials, log_pq_exponential_neg, pq_exponential,
                                   pq_exponential_product, pq_factorial, pq_shifted_factorial,
                                   ramanujan_moment)
from nvcs.errors import DomainError, SingularityError, ZeroFactorialError

# high-precision values (40 digits, independent evaluation of the defining formulas)
BURBAN_5 = 3.3474455365070691893
BURBAN_20 = 2.9773670776931838231
PQ_FACT_5 = 2.7324884275474293352e-9
PQ_FACT_10 = 1.5333546777492784791e-16
RAMANUJAN_2 = 2.061237654420737e-6


def test_canonical_numbers():
    assert np.array_equal(basic_numbers(Canonical(), 4), [0, 1, 2, 3, 4])
    assert basic_factorial(Canonical(), 6) == pytest.approx(720.0, rel=1e-14)
    assert f_value(Canonical(), 3) == 1.0


def test_burban_reference_values():
    spec = Burban(1.1, 0.9)
    assert basic_number(spec, 1) == pytest.approx(1.0, rel=1e-14)
    assert basic_number(spec, 5) == pytest.approx(BURBAN_5, rel=1e-13)
    assert basic_number(spec, 20) == pytest.approx(BURBAN_20, rel=1e-13)
    assert basic_number(spec, 0) == 0.0


def test_burban_domain():
    with pytest.raises(DomainError):
        Burban(0.9, 0.5)
    with pytest.raises(DomainError):
        Burban(1.1, 1.2)
    with pytest.raises(DomainError):
        Burban(2.0, 0.9)  # (pq)^alpha >= 1
    with pytest.raises(SingularityError):
        basic_number(Burban(1.1, 0.9, ell=0.0), 2)
    with pytest.raises(SingularityError):
        Burban(1.1, 0.9, beta=0.5).f_zero()


def test_burban_near_canonical():
    # p, q -> 1 with ell = alpha = 1 recovers {n} -> n
    spec = Burban(1 + 1e-7, 1 - 1e-7)
    assert np.allclose(basic_numbers(spec, 10), np.arange(11), rtol=1e-6)


def test_multiparam_constraints():
    s = MultiParam.with_k0(1.1, 0.9, 1.0, 1.0, 0.0, 0.0, 1)
    assert s.phi1_value / s.phi2_value == pytest.approx(0.99, rel=1e-14)
    assert s.ground_cancels()
    assert basic_number(s, 0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        MultiParam(1.1, 0.9, 1.0, 0.0, 1.0, 0.0, 0.0, lambda p, q: 2.0, lambda p, q: 1.0, 0)
    with pytest.raises(DomainError):
        MultiParam(1.1, 0.9, 1.0, 0.0, 1.0, 0.0, 0.0, lambda p, q: 1.0, lambda p, q: 1.5, 1)


def test_multiparam_equal_phis_allowed():
    # k0 = 0 forces phi1 = phi2; the strict inequality cannot hold there
    s = MultiParam.with_k0(1.1, 0.9, 1.0, 1.0, 0.0, 0.0, 0)
    assert s.phi1_value == s.phi2_value


def test_custom_table():
    spec = CustomTable((1.0, 2.0, 0.5))
    assert np.allclose(basic_numbers(spec, 2), [0.0, 4.0, 0.5])
    with pytest.raises(DomainError):
        basic_number(spec, 5)
    with pytest.raises(DomainError):
        CustomTable((1.0, 0.0))


def test_zero_factorial():
    spec = CustomTable((1.0, 1.0, 1.0))
    object.__setattr__(spec, "f_values", (1.0, 0.0, 1.0))
    with pytest.raises((ZeroFactorialError, SingularityError)):
        log_basic_factorials(spec, 2)


def test_round_trip_dict():
    for spec in (Canonical(), Burban(1.2, 0.7, 2.0, 0.0, 1.5), CustomTable((1.0, 2.0)),
                 MultiParam.with_k0(1.1, 0.9, 1.0, 1.0, 0.5, 0.2, 1)):
        back = deformation_from_dict(spec.to_dict())
        assert back.to_dict() == spec.to_dict()
        assert np.allclose(basic_numbers(back, 1), basic_numbers(spec, 1))


def test_pq_factorials():
    assert pq_factorial(1.1, 0.9, 0) == 1.0
    assert pq_factorial(1.1, 0.9, 5) == pytest.approx(PQ_FACT_5, rel=1e-12)
    assert pq_factorial(1.1, 0.9, 10) == pytest.approx(PQ_FACT_10, rel=1e-12)


def test_shifted_factorial_gives_pq_factorial():
    p, q = 1.3, 0.6
    for n in range(6):
        assert pq_shifted_factorial(p, q, p, q, n) == pytest.approx(pq_factorial(p, q, n), rel=1e-13)
    with pytest.raises(DomainError):
        pq_shifted_factorial(0.0, q, p, q, 2)


def test_exponential_forms_agree():
    p, q = 1.1, 0.9
    for x in (0.0, 0.1, 0.3, 0.5):
        assert pq_exponential(p, q, x).real == pytest.approx(pq_exponential_product(p, q, x).real, rel=1e-11)
    with pytest.raises(DomainError):
        pq_exponential(p, q, 1.0)
    with pytest.raises(DomainError):
        PQParams(1.1, 0.9, 0.0, 0.0)


def test_exponential_negative_axis_log_form():
    p, q = 1.1, 0.9
    x = np.array([0.0, 0.5, 3.0])
    got = np.exp(log_pq_exponential_neg(p, q, x))
    ref = [pq_exponential_product(p, q, -t / math.sqrt(p)).real for t in x]
    assert np.allclose(got, ref, rtol=1e-12)


def test_generalized_exponential_canonical_limit():
    # mu = 0, nu = 1/2 is the (p,q)-exponential of the series form
    assert generalized_exponential(PQParams(1.1, 0.9, 0.0, 0.5), 0.2) == pytest.approx(
        pq_exponential(1.1, 0.9, 0.2))


def test_ramanujan_closed_form_reference():
    assert ramanujan_moment(1.1, 0.9, 1.0, 0) == pytest.approx(math.log(1 / 0.99), rel=1e-14)
    assert ramanujan_moment(1.1, 0.9, 1.0, 2) == pytest.approx(RAMANUJAN_2, rel=1e-12)
    with pytest.raises(DomainError):
        ramanujan_moment(1.1, 0.9, -1.0, 2)


@given(st.floats(1.01, 2.0), st.floats(0.05, 0.95), st.integers(1, 30))
def test_burban_positive(p, q, n):
    if p * q >= 1:
        return
    assert basic_number(Burban(p, q), n) > 0


@given(st.floats(1.01, 1.5), st.floats(0.3, 0.95), st.floats(0.0, 0.5))
def test_series_equals_product(p, q, x):
    if p * q >= 1 or x >= p ** -0.5:
        return
    a = pq_exponential(p, q, x).real
    b = pq_exponential_product(p, q, x).real
    assert abs(a - b) <= 1e-9 * abs(b)
