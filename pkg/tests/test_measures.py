import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvcs import measures as ms
from nvcs.deformed_algebra import Canonical, MultiParam
from nvcs.errors import DomainError
from nvcs.ladder import K_action_identity, K_pq, K_simple
from nvcs.spectrum import Coupling, ModelParams, reorganized_spectrum


def pq_setup():
    # alpha = ell = 1, rho = xi = 0, so mu = 1/2 and nu = 0 satisfy the density relations
    spec = MultiParam.with_k0(1.1, 0.9, 1.0, 1.0, 0.0, 0.0, 1)
    return spec, K_pq(spec, 0.5, 0.0, 1.0)


def test_simple_moments():
    lad = K_simple(Canonical())
    mv = ms.verify_moments(ms.density_simple(), ms.MomentProblem.from_ladder(lad), 15, 1e-10)
    assert mv.passed
    assert mv.rows[15].target == pytest.approx(float(math.factorial(15)))


def test_simple_weights():
    lad = K_simple(Canonical())
    d = ms.density_simple()
    r = np.linspace(0.1, 4, 25)
    assert np.allclose(d.weight("+", r), 3 / (4 * math.pi ** 2))
    assert np.allclose(d.weight("-", r), 3 / (8 * math.pi ** 2))
    assert ms.weight_identity_error(d, lad, r) < 1e-12


def test_derived_weight_equals_closed_form():
    lad = K_simple(Canonical())
    d = ms.Density("plain", ms.exp_density().h)
    r = np.array([0.3, 1.0, 2.5])
    assert np.allclose(d.weight("-", r, lad), 3 / (8 * math.pi ** 2), rtol=1e-12)
    with pytest.raises(DomainError):
        d.weight("+", r)


def test_action_identity_moments():
    for det in (0.0, 0.1, 0.5):
        lad = K_action_identity(det)
        mv = ms.verify_moments(ms.density_canonical_action(det), ms.MomentProblem.from_ladder(lad, "-"),
                               15, 1e-8)
        assert mv.passed
        assert mv.rows[4].target == pytest.approx((1 + det) ** 4 * 24)


def test_pq_density_moments():
    spec, lad = pq_setup()
    d = ms.density_pq(spec, 0.5, 0.0, 1.0)
    mv = ms.verify_moments(d, ms.MomentProblem.from_ladder(lad), 8, 1e-6)
    assert mv.passed, mv.to_dict()


def test_pq_density_relations_enforced():
    spec = MultiParam.with_k0(1.1, 0.9, 1.0, 1.0, 0.0, 0.0, 1)
    with pytest.raises(DomainError):
        ms.density_pq(spec, 0.3, 0.0)
    with pytest.raises(DomainError):
        ms.density_pq(MultiParam.with_k0(1.1, 0.9, 1.0, 1.5, 0.0, 0.0, 1), 0.5, 0.0)


def test_ramanujan():
    for n in range(9):
        quad, closed, rel = ms.ramanujan_check(1.1, 0.9, 1.0, n)
        assert rel < 1e-6
    # 20-digit quadrature of the product form at n = 2
    assert ms.ramanujan_quadrature(1.1, 0.9, 1.0, 2) == pytest.approx(2.061237654420737e-6, rel=1e-10)


def test_zero_density_fails_at_ground():
    lad = K_simple(Canonical())
    d = ms.custom_density(lambda u: np.zeros(np.shape(u)), "zero")
    mv = ms.verify_moments(d, ms.MomentProblem.from_ladder(lad), 3, 1e-8)
    assert not mv.passed
    assert not mv.rows[0].passed


def test_wrong_density_detected():
    lad = K_action_identity(0.5)
    mv = ms.verify_moments(ms.density_simple(), ms.MomentProblem.from_ladder(lad), 5, 1e-8)
    assert not mv.passed
    assert mv.rows[0].passed  # the zeroth moment is one for both


def test_identity_resolution_canonical():
    p = ModelParams(1, 1, 1.0, 0.0, 1.0, Coupling(0.3))
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(p, 25)
    rep = ms.resolution_of_identity_check(lad, sp, ms.density_simple(), 25, 10)
    assert rep.max_diagonal_error < 1e-4
    assert rep.max_offdiagonal < 1e-4
    assert abs(rep.audit["+"] - 1) < 1e-3 and abs(rep.audit["-"] - 1) < 1e-3


def test_identity_detects_wrong_weight():
    p = ModelParams(1, 1, 1.0, 0.0, 1.0, Coupling(0.3))
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(p, 25)
    d = ms.density_simple()
    bad = ms.Density("half", d.h, {"+": lambda r: 0.5 * 3 / (4 * math.pi ** 2), "-": d.weights["-"]})
    rep = ms.resolution_of_identity_check(lad, sp, bad, 25, 10)
    assert rep.audit["+"] == pytest.approx(0.5, abs=1e-6)
    assert rep.max_error > 0.4


def test_identity_refinement_halves():
    p = ModelParams(1, 1, 1.0, 0.0, 1.0, Coupling(0.3))
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(p, 25)
    study = ms.identity_refinement(lad, sp, ms.density_simple())
    assert study.halves
    assert study.fine.max_error <= 0.5 * study.coarse.max_error


@given(st.floats(0.2, 3.0), st.integers(0, 10))
def test_scaled_density_moments_property(s, n):
    d = ms.scaled_exp_density(s)
    assert ms.moment_integral(d, n) == pytest.approx(s ** n * math.factorial(n), rel=1e-10)
