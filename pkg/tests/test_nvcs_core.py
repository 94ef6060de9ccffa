import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvcs import nvcs_core as core
from nvcs.deformed_algebra import Burban, Canonical, MultiParam
from nvcs.errors import DivergenceError, RadiusError
from nvcs.ladder import K_action_identity, K_pq, K_simple, LadderSpec
from nvcs.spectrum import Coupling, ModelParams, build_hamiltonian_matrix, reorganized_spectrum


def geometric_ladder():
    """K0(n) = 1 for n >= 1 and h = 1: coefficients z^n, radius 1."""
    def K0(n):
        return np.where(np.asarray(n) == 0, 0.0, 1.0)

    def one(n):
        return np.ones(np.shape(n))

    return LadderSpec(K0, K0, one, one, "geometric")


def model(k=1, eps=1, deformation=None):
    return ModelParams(k, eps, 1.0, 0.0, 1.0, Coupling(0.3, phase=0.2),
                       Canonical() if deformation is None else deformation)


def test_canonical_norm_is_gaussian():
    lad = K_simple(Canonical())
    for r in (0.0, 0.5, 2.0, 5.0):
        N, tail = core.norm_factor(lad, "+", r)
        assert N == pytest.approx(math.exp(-0.5 * r * r), rel=1e-13)
        assert tail < 1e-12


def test_action_identity_norm():
    lad = K_action_identity(0.5)
    N, _ = core.norm_factor(lad, "-", 1.2)
    assert N ** -2 == pytest.approx(math.exp(1.44 / 1.5), rel=1e-13)


def test_pq_norm_reference():
    # 40-digit partial sums of r^2n (q^1/2)^{n(n-1)} / [n]_0!
    lad = K_pq(MultiParam.with_k0(1.1, 0.9, 1.0, 1.0, 0.0, 0.0, 1), 0.5, 0.0, 1.0)
    N, _ = core.norm_factor(lad, "+", 0.5)
    assert N ** -2 == pytest.approx(1.31628084801169237, rel=1e-13)


def test_finite_radius():
    lad = geometric_ladder()
    Rp, Rm, R = core.convergence_radius(lad)
    assert R == pytest.approx(1.0, rel=1e-12)
    assert not Rp.infinite
    N, _ = core.norm_factor(lad, "+", 0.6)
    assert N == pytest.approx(math.sqrt(1 - 0.36), rel=1e-10)
    with pytest.raises(RadiusError):
        core.check_radius(lad, 1.0)
    with pytest.raises(DivergenceError):
        core.norm_factor(lad, "+", 1.01)


def test_infinite_radius():
    assert math.isinf(core.convergence_radius(K_simple(Burban(1.1, 0.9)))[2])


def test_pure_towers():
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(model(), 40)
    s = core.coefficients(core.S2Label(0.5, theta=0.0), lad, sp, 30)
    assert np.all(s.C_minus == 0)
    s = core.coefficients(core.S2Label(0.5, theta=math.pi / 2), lad, sp, 30)
    assert np.max(np.abs(s.C_plus)) < 1e-16


def test_canonical_expansion():
    # theta = 0, tau = 0: the plus tower carries e^{-|z|^2/2} z^n / sqrt(n!)
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(model(), 40)
    z = 0.7 - 0.4j
    s = core.coefficients(core.S2Label(z), lad, sp, 25)
    n = np.arange(26)
    ref = np.exp(-abs(z) ** 2 / 2) * z ** n / np.sqrt([float(math.factorial(m)) for m in n])
    assert np.allclose(s.C_plus, ref, atol=1e-15)


def test_annihilation_both_routes():
    for d, k, eps in ((Canonical(), 1, 1), (Burban(1.1, 0.9), 2, -1)):
        lad = K_simple(d)
        sp = reorganized_spectrum(model(k, eps, d), 40)
        s = core.coefficients(core.S2Label(0.6 + 0.3j, 0.4, -0.2, 0.8, 1.3), lad, sp, 30)
        assert core.annihilation_residual(s) < 1e-13
        assert core.annihilation_residual_matrix(s) < 1e-12


def test_evolution_matches_propagator():
    from scipy.linalg import expm
    p = model(2, 1, Burban(1.1, 0.9))
    lad = K_simple(p.deformation)
    sp = reorganized_spectrum(p, 40)
    s = core.coefficients(core.S2Label(0.5 + 0.2j, 0.1, 0.3, 0.6, 0.2), lad, sp, 30)
    t = 0.9
    psi, trunc, _ = core.to_fock(s)
    H = build_hamiltonian_matrix(p, trunc.N)
    lhs = expm(-1j * t * H) @ psi
    rhs, _, _ = core.to_fock(core.coefficients(s.label.shifted(t), lad, sp, 30), trunc.N)
    assert np.max(np.abs(lhs - rhs)) < 1e-11


def test_action_variables_sum_to_energy():
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(model(), 80)
    s = core.coefficients(core.S2Label(1.1, theta=0.4), lad, sp, 70)
    jp, jm = core.action_variables(s)
    H = np.sum(np.abs(s.C_plus) ** 2 * sp.e_plus[:71]) + np.sum(np.abs(s.C_minus) ** 2 * sp.e_minus[:71])
    assert jp + jm == pytest.approx(H, rel=1e-14)
    assert core.hamiltonian_expectation(s) == pytest.approx(H, rel=1e-14)


def test_action_identity_plus_tower():
    # decoupled canonical model: e_n^+ affine with slope 1 + detuning
    det = 0.1
    p = ModelParams(1, 1, 1.0, det, 1.0, Coupling(0.0))
    sp = reorganized_spectrum(p, 120)
    lad = K_action_identity(det)
    rng = np.random.default_rng(7)
    for _ in range(5):
        z = complex(*rng.uniform(-1.5, 1.5, 2))
        th = rng.uniform(0, math.pi)
        s = core.coefficients(core.S2Label(z, *rng.uniform(-1, 1, 2), th, rng.uniform(0, 2 * math.pi)),
                              lad, sp, 110)
        jp, _ = core.action_variables(s)
        assert jp == pytest.approx(math.cos(th) ** 2 * (abs(z) ** 2 + sp.e_plus[0]), rel=1e-10, abs=1e-12)


def test_rabi_frequencies():
    p = model()
    sp = reorganized_spectrum(p, 20)
    f = core.pair_frequencies(sp, 10)
    assert np.allclose(f, 2 * sp.Q[:11], rtol=1e-13)


def test_atomic_inversion_conserves_norm():
    p = model()
    sp = reorganized_spectrum(p, 50)
    s = core.coefficients(core.S2Label(1.0, theta=0.3), K_simple(Canonical()), sp, 40)
    inv, norms = core.atomic_inversion(s, np.linspace(0, 5, 6))
    assert np.allclose(norms, s.norm(), rtol=1e-13)
    assert np.all(np.abs(inv) <= norms + 1e-14)


def test_continuity_at_origin():
    lad = K_simple(Burban(1.1, 0.9))
    sp = reorganized_spectrum(model(2, 1, Burban(1.1, 0.9)), 30)
    base = core.coefficients(core.S2Label(0j, 0.1, 0.2, 0.7, 0.5), lad, sp, 20).vector()
    for eps in (1e-3, 1e-6):
        v = core.coefficients(core.S2Label(eps * 1j, 0.1, 0.2, 0.7, 0.5), lad, sp, 20).vector()
        assert np.linalg.norm(v - base) <= 2.0 * eps


@given(st.complex_numbers(max_magnitude=3.0), st.floats(0, math.pi), st.floats(0, 2 * math.pi),
       st.floats(-3, 3), st.floats(-3, 3))
def test_normalization_property(z, th, ph, tp, tm):
    lad = K_simple(Burban(1.1, 0.9))
    sp = reorganized_spectrum(model(1, 1, Burban(1.1, 0.9)), 90)
    s = core.coefficients(core.S2Label(z, tp, tm, th, ph), lad, sp, 80)
    assert abs(s.norm() - 1.0) <= 1e-12 + s.tail


@given(st.floats(-4, 4), st.floats(-4, 4))
def test_evolution_composes(t1, t2):
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(model(), 40)
    s = core.coefficients(core.S2Label(0.8j, 0.2, -0.1, 1.0, 0.3), lad, sp, 30)
    a = core.evolve(core.evolve(s, t1), t2)
    b = core.evolve(s, t1 + t2)
    assert np.max(np.abs(a.vector() - b.vector())) < 1e-12
    assert a.label.tau_plus == pytest.approx(0.2 + t1 + t2)
