import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvcs import matrix_nvcs as mx
from nvcs.deformed_algebra import Burban, Canonical
from nvcs.errors import DomainError, RadiusError
from nvcs.ladder import K_simple, LadderSpec
from nvcs.spectrum import Coupling, ModelParams, reorganized_spectrum


def model(k=1, d=None):
    return ModelParams(k, 1, 1.0, 0.0, 1.0, Coupling(0.3, phase=0.3), Canonical() if d is None else d)


def test_haar_average_is_half_identity():
    for s in (0, 1):
        P = mx.haar_average_projector(basis_index=s)
        assert np.max(np.abs(P - 0.5 * np.eye(2))) < 1e-10


def test_haar_weights_sum_to_one():
    Us, ws = mx.haar_nodes(6, 6)
    assert ws.sum() == pytest.approx(1.0, rel=1e-14)
    for U in Us[:5]:
        assert np.allclose(U.conj().T @ U, np.eye(2), atol=1e-14)


def test_quaternion_norm_closed_form():
    lad = K_simple(Canonical())
    for r in (0.5, 1.0, 2.0):
        lab = mx.QuaternionLabel(r, 0.3, 0.7, 1.1)
        N = mx.matrix_norm(lad, lab)
        assert N ** -2 == pytest.approx(2 * math.exp(r * r), rel=1e-12)


def test_quaternion_form():
    lab = mx.QuaternionLabel(0.8, 0.4, 0.9, 0.3)
    Z = lab.matrix
    assert np.allclose(lab.U @ np.diag([lab.z, lab.w]) @ lab.U.conj().T, Z, atol=1e-14)
    assert np.allclose(lab.sigma @ lab.sigma, np.eye(2))
    assert np.allclose(mx.quaternion_form(lab, 3), np.linalg.matrix_power(Z, 3), atol=1e-14)


def test_normal_label_from_matrix():
    V = mx.u2_from_angles(0.3, 0.8, 1.1, 0.2)
    lab = mx.NormalMatrixLabel(0.5 + 0.2j, -0.3 + 0.4j, V)
    back = mx.NormalMatrixLabel.from_matrix(lab.matrix)
    assert np.allclose(back.matrix, lab.matrix, atol=1e-13)
    # column rephasing leaves the canonical label unchanged
    V2 = V @ np.diag(np.exp(1j * np.array([0.7, -1.2])))
    again = mx.NormalMatrixLabel(lab.z, lab.w, V2).canonical()
    assert np.allclose(again.V, back.V, atol=1e-12) and again.z == pytest.approx(back.z)
    with pytest.raises(DomainError):
        mx.NormalMatrixLabel(0.1, 0.2, np.array([[1, 1], [0, 1]]))
    with pytest.raises(DomainError):
        mx.NormalMatrixLabel.from_matrix(np.array([[1.0, 1.0], [0.0, 2.0]]))


def test_matrix_state_properties():
    for kind in ("normal", "quaternion"):
        p = model(2, Burban(1.1, 0.9))
        lad = K_simple(p.deformation)
        sp = reorganized_spectrum(p, 60)
        if kind == "normal":
            lab = mx.NormalMatrixLabel(0.5 + 0.2j, -0.3 + 0.4j, mx.u2_from_angles(0.3, 0.8, 1.1), 0.2, -0.1)
        else:
            lab = mx.QuaternionLabel(0.8, 0.4, 0.9, 0.3, 0.2, -0.1)
        st_ = mx.matrix_coefficients(lab, lad, sp, 50)
        assert st_.total_norm() == pytest.approx(1.0, abs=1e-12)
        assert mx.matrix_eigen_residual(st_) < 1e-12
        ev = mx.matrix_evolve(st_, 0.6)
        rl = mx.matrix_coefficients(lab.shifted(0.6), lad, sp, 50)
        assert np.max(np.abs(ev.M - rl.M)) < 1e-12


def test_original_basis_routes_agree():
    p = model(2, Burban(1.1, 0.9))
    lad = K_simple(p.deformation)
    sp = reorganized_spectrum(p, 40)
    lab = mx.NormalMatrixLabel(0.5 + 0.2j, -0.3 + 0.4j, mx.u2_from_angles(0.3, 0.8, 1.1), 0.2, -0.1)
    st_ = mx.matrix_coefficients(lab, lad, sp, 30)
    for s in (0, 1):
        a, _ = mx.original_basis_state(st_, s)
        b = mx.original_basis_expansion(st_, s)
        assert np.max(np.abs(a - b)) < 1e-13


def test_radius_enforced():
    def K0(n):
        return np.where(np.asarray(n) == 0, 0.0, 1.0)

    lad = LadderSpec(K0, K0, lambda n: np.ones(np.shape(n)), lambda n: np.ones(np.shape(n)))
    sp = reorganized_spectrum(model(), 20)
    with pytest.raises(RadiusError):
        mx.matrix_coefficients(mx.QuaternionLabel(1.2, 0.0, 0.5, 0.0), lad, sp, 10)
    with pytest.raises(RadiusError):
        mx.matrix_coefficients(mx.NormalMatrixLabel(0.5, 1.5, np.eye(2)), lad, sp, 10)


def test_normal_identity_resolution():
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(model(), 25)
    rep = mx.normal_resolution_check(lad, sp)
    assert rep.max_error < 1e-4
    assert abs(rep.audit - 1) < 1e-3


def test_quaternion_identity_resolution():
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(model(), 25)
    rep = mx.quaternion_resolution_check(lad, sp)
    assert rep.max_error < 1e-4
    assert abs(rep.audit - 1) < 1e-3
    # the literal measure: N^-2 W / (4 pi) equals the claimed 1/(2 pi^2)
    r = 1.3
    N = mx.matrix_norm(lad, mx.QuaternionLabel(r, 0.0, 0.0, 0.0))
    assert N ** -2 * math.exp(-r * r) / math.pi / (4 * math.pi) == pytest.approx(rep.claimed_prefactor, rel=1e-12)


def test_identity_audit_sees_scaled_measure():
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(model(), 25)
    rep = mx.quaternion_resolution_check(lad, sp, weight_scale=2.0)
    assert rep.audit == pytest.approx(2.0, rel=1e-6)


@given(st.floats(0, 2 * math.pi), st.floats(0, math.pi), st.floats(0, 4 * math.pi), st.floats(0, 2 * math.pi))
def test_u2_unitary_property(a, b, c, g):
    U = mx.u2_from_angles(a, b, c, g)
    assert np.allclose(U.conj().T @ U, np.eye(2), atol=1e-13)


@given(st.floats(0.05, 2.5), st.floats(0, 2 * math.pi), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_quaternion_normalization_property(r, xi, th, ph):
    lad = K_simple(Burban(1.1, 0.9))
    sp = reorganized_spectrum(model(1, Burban(1.1, 0.9)), 80)
    st_ = mx.matrix_coefficients(mx.QuaternionLabel(r, xi, th, ph), lad, sp, 70)
    assert st_.total_norm() == pytest.approx(1.0, abs=1e-12)
