"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import dataclasses
import itertools
import math
import time

import numpy as np
import pytest

from nvcs import displacement as dsp
from nvcs import matrix_nvcs as mx
from nvcs import measures as ms
from nvcs import nvcs_core as core
from nvcs import s3_nvcs as s3
from nvcs.deformed_algebra import Burban, Canonical, MultiParam
from nvcs.ladder import K_action_identity, K_pq, K_simple, pq_recurrence_residuals
from nvcs.spectrum import Coupling, ModelParams, oracle_comparison, reorganized_spectrum

RESULTS = {}


def gate(number, title, checks):
    """checks: name -> (value, tolerance) or name -> bool."""
    failed = []
    parts = []
    for name, c in checks.items():
        if isinstance(c, tuple):
            value, tol = c
            ok = bool(value <= tol)
            parts.append(f"{name}={value:.2e}<= {tol:.0e}")
        else:
            ok = bool(c)
            parts.append(f"{name}={'yes' if ok else 'no'}")
        if not ok:
            failed.append(name)
    line = f"{'PASS' if not failed else 'FAIL'} criterion {number:2d} {title}: " + "; ".join(parts)
    RESULTS[number] = line
    print(line)
    assert not failed, f"criterion {number} failed: {failed}"


BURBAN = Burban(1.1, 0.9, 1.0, 0.0, 1.0)
GRID = list(itertools.product((1, 2, 3), (1, -1), (1.0, 0.5), (0.0, 0.1), (Canonical(), BURBAN)))


@pytest.fixture(scope="module")
def oracle_grid():
    t0 = time.perf_counter()
    out = [oracle_comparison(ModelParams(k, e, kap, det, 1.0, Coupling(0.3), d), 60, 40)
           for k, e, kap, det, d in GRID]
    return out, time.perf_counter() - t0


def test_criterion_01_spectrum_oracle(oracle_grid):
    out, elapsed = oracle_grid
    gate(1, "spectrum oracle", {
        "eigenvalue_rel": (max(o.eigenvalue_error for o in out), 1e-10),
        "points": len(out) == 48,
        "runtime_s": (elapsed, 10.0),
    })


def test_criterion_02_mixing_and_eigenvectors(oracle_grid):
    out, _ = oracle_grid
    gate(2, "mixing normalization and eigenvectors", {
        "mixing_norm": (max(o.normalization_error for o in out), 1e-12),
        "eigenvectors": (max(o.eigenvector_error for o in out), 1e-10),
        "residual": (max(o.residual_error for o in out), 1e-10),
    })


def test_criterion_03_simple_moments():
    lad = K_simple(Canonical())
    d = ms.density_simple()
    mv = ms.verify_moments(d, ms.MomentProblem.from_ladder(lad), 15, 1e-10)
    exact = max(abs(r.target - math.factorial(r.n)) / math.factorial(r.n) for r in mv.rows)
    r = np.linspace(0.05, 4.0, 40)
    gate(3, "simple-class moments and weights", {
        "moments_rel": (mv.max_error, 1e-10),
        "targets_are_factorials": (exact, 1e-13),
        "W_plus": (float(np.max(np.abs(d.weight("+", r) - 3 / (4 * math.pi ** 2)))), 1e-15),
        "W_minus": (float(np.max(np.abs(d.weight("-", r) - 3 / (8 * math.pi ** 2)))), 1e-15),
        "weight_identity": (ms.weight_identity_error(d, lad, r), 1e-12),
    })


def test_criterion_04_action_identity():
    worst_m = 0.0
    for det in (0.0, 0.1, 0.5):
        lad = K_action_identity(det)
        for br in ("+", "-"):
            mv = ms.verify_moments(ms.density_canonical_action(det), ms.MomentProblem.from_ladder(lad, br),
                                   15, 1e-8)
            worst_m = max(worst_m, mv.max_error)
            worst_m = max(worst_m, max(abs(r.target - (1 + det) ** r.n * math.factorial(r.n))
                                       / r.target for r in mv.rows))
    rng = np.random.default_rng(2024)
    worst_j = 0.0
    for i in range(20):
        det = (0.0, 0.1, 0.5)[i % 3]
        p = ModelParams(1 + i % 3, 1, 1.0, det, 1.0, Coupling(0.0))
        sp = reorganized_spectrum(p, 160)
        z = complex(*rng.uniform(-1.5, 1.5, 2))
        th = rng.uniform(0, math.pi)
        lab = core.S2Label(z, *rng.uniform(-2, 2, 2), th, rng.uniform(0, 2 * math.pi))
        st = core.coefficients(lab, K_action_identity(det), sp, 150)
        jp, _ = core.action_variables(st)
        want = math.cos(th) ** 2 * (abs(z) ** 2 + sp.e_plus[0])
        worst_j = max(worst_j, abs(jp - want) / max(abs(want), 1e-300))
    gate(4, "canonical action-identity class", {
        "moments_rel": (worst_m, 1e-8),
        "J_plus_rel_20_labels": (worst_j, 1e-10),
    })


def test_criterion_05_pq_class():
    p, q = 1.1, 0.9
    rec = 0.0
    for k0 in (0, 1):
        e1, e2 = pq_recurrence_residuals(MultiParam.with_k0(p, q, 1.0, 1.0, 0.0, 0.0, k0), 50)
        rec = max(rec, float(np.max(e1)), float(np.max(e2)))
    spec = MultiParam.with_k0(p, q, 1.0, 1.0, 0.0, 0.0, 1)
    lad = K_pq(spec, 0.5, 0.0, 1.0)
    mv = ms.verify_moments(ms.density_pq(spec, 0.5, 0.0, 1.0), ms.MomentProblem.from_ladder(lad), 8, 1e-6)
    ram = max(ms.ramanujan_check(p, q, 1.0, n)[2] for n in range(9))
    gate(5, "(p,q) class", {
        "recurrences": (rec, 1e-10),
        "density_moments": (mv.max_error, 1e-6),
        "ramanujan": (ram, 1e-6),
    })


def test_criterion_06_s2_resolution():
    t0 = time.perf_counter()
    lad = K_simple(Canonical())
    sp = reorganized_spectrum(ModelParams(1, 1, 1.0, 0.0, 1.0, Coupling(0.3)), 25)
    d = ms.density_simple()
    rep = ms.resolution_of_identity_check(lad, sp, d, 25, 10, ms.IdentityGrid(r_max=8.0))
    study = ms.identity_refinement(lad, sp, d, 25, 10, r_max=8.0)
    elapsed = time.perf_counter() - t0
    gate(6, "S2 resolution of identity", {
        "diagonal": (rep.max_diagonal_error, 1e-4),
        "off_diagonal": (rep.max_offdiagonal, 1e-4),
        "audit": (max(abs(a - 1) for a in rep.audit.values()), 1e-3),
        "refinement_halves": study.halves,
        "refinement_ratio": (study.ratio, 0.5),
        "runtime_s": (elapsed, 60.0),
    })


def test_criterion_07_haar():
    err = max(float(np.max(np.abs(mx.haar_average_projector(basis_index=s) - 0.5 * np.eye(2)))) for s in (0, 1))
    gate(7, "Haar orthogonality", {"half_identity": (err, 1e-10)})


def test_criterion_08_quaternion_and_matrix_identity():
    lad = K_simple(Canonical())
    norm_err = max(abs(mx.matrix_norm(lad, mx.QuaternionLabel(r, 0.3, 0.7, 1.1)) ** -2 / (2 * math.exp(r * r)) - 1)
                   for r in (0.5, 1.0, 2.0))
    sp = reorganized_spectrum(ModelParams(1, 1, 1.0, 0.0, 1.0, Coupling(0.3)), 25)
    nrm = mx.normal_resolution_check(lad, sp)
    qua = mx.quaternion_resolution_check(lad, sp)
    gate(8, "quaternion norm and matrix identity", {
        "quaternion_norm_rel": (norm_err, 1e-12),
        "normal_identity": (nrm.max_error, 1e-4),
        "normal_audit": (abs(nrm.audit - 1), 1e-3),
        "quaternion_identity": (qua.max_error, 1e-4),
        "quaternion_audit": (abs(qua.audit - 1), 1e-3),
    })


def test_criterion_09_displacement():
    n_max = 40
    rec, comm = 0.0, 0.0
    for d in (Canonical(), BURBAN):
        p = ModelParams(2, 1, 1.0, 0.0, 1.0, Coupling(0.3, phase=0.4), d)
        lad = K_simple(d)
        sp = reorganized_spectrum(p, n_max + dsp.MARGIN + 2)
        comm = max(comm, max(dsp.commutator_checks(lad, n_max, sp, (0.2, -0.3)).values()))
        for z in (0.0, 0.5, 0.7 - 0.7j, 1.0j, -1.0):
            lab = core.S2Label(z, 0.2, -0.3, 0.8, 1.3)
            st = core.coefficients(lab, lad, sp, n_max)
            cp, cm = dsp.reconstruct_nvcs(lab, lad, sp, n_max)
            rec = max(rec, float(np.max(np.abs(cp - st.C_plus))), float(np.max(np.abs(cm - st.C_minus))))
    gate(9, "displacement reconstruction", {"reconstruction": (rec, 1e-8), "commutators": (comm, 1e-12)})


def test_criterion_10_duals_and_t_operators():
    n_max = 40
    lab = core.S2Label(0.6 + 0.5j, 0.2, -0.1, 0.7, 0.4)
    # canonical dual equals the original; with time labels the dual runs at -tau
    lad0 = K_simple(Canonical())
    sp0 = reorganized_spectrum(ModelParams(1, 1, 1.0, 0.0, 1.0, Coupling(0.3)), n_max)
    du = dsp.dual_state(lab, lad0, sp0, n_max)
    orig = core.coefficients(dataclasses.replace(lab, tau_plus=-lab.tau_plus, tau_minus=-lab.tau_minus),
                             lad0, sp0, n_max)
    at_zero = core.S2Label(lab.z, 0.0, 0.0, lab.theta, lab.phi)
    can = max(float(np.max(np.abs(du.vector() - orig.vector()))),
              float(np.max(np.abs(dsp.dual_state(at_zero, lad0, sp0, n_max).vector()
                                  - core.coefficients(at_zero, lad0, sp0, n_max).vector()))))
    t_err, s_err = 0.0, 0.0
    ratios = []
    for d in (Canonical(), BURBAN):
        lad = K_simple(d)
        sp = reorganized_spectrum(ModelParams(1, 1, 1.0, 0.0, 1.0, Coupling(0.3, phase=0.3), d), n_max)
        spc = dsp.canonical_spectrum(sp, n_max)
        T = dsp.t_operator_s2(lab, lad, sp, n_max)
        st = core.coefficients(lab, lad, sp, n_max)
        t_err = max(t_err, float(np.max(np.abs(T.apply(dsp.canonical_s2_state(lab, spc, n_max))
                                               - np.stack([st.C_plus, st.C_minus], axis=1)))))
        S = dsp.script_t_operator_s2(lab, lad, sp, n_max)
        dd = dsp.dual_state(lab, lad, sp, n_max)
        s_err = max(s_err, float(np.max(np.abs(S.apply(dsp.canonical_s2_state(lab, spc, n_max, tau_sign=-1))
                                               - np.stack([dd.C_plus, dd.C_minus], axis=1)))))

        def builder(lb):
            x = dsp.dual_state(lb, lad, sp, n_max)
            return np.stack([x.C_plus, x.C_minus], axis=1)

        ratios.append(dsp.proper_time_derivative_check(builder, lab, sp, n_max, +1))
    # matrix T-operator on the canonical-h class
    mlab = mx.NormalMatrixLabel(0.5 + 0.2j, -0.3 + 0.4j, mx.u2_from_angles(0.3, 0.8, 1.1), 0.2, -0.1)
    for d in (Canonical(), BURBAN):
        lad = K_simple(d)
        sp = reorganized_spectrum(ModelParams(1, 1, 1.0, 0.0, 1.0, Coupling(0.3), d), n_max)
        spc = dsp.canonical_spectrum(sp, n_max)
        cm, _ = dsp.canonical_matrix_state(mlab, spc, n_max)
        t_err = max(t_err, float(np.max(np.abs(dsp.t_operator_matrix(mlab, lad, sp, n_max).apply(cm)
                                               - mx.matrix_coefficients(mlab, lad, sp, n_max).M))))
    lad, sp = K_simple(Canonical()), sp0
    cm, _ = dsp.canonical_matrix_state(mlab, dsp.canonical_spectrum(sp, n_max), n_max, tau_sign=-1)
    s_err = max(s_err, float(np.max(np.abs(dsp.script_t_operator_matrix(mlab, lad, sp, n_max).apply(cm)
                                           - dsp.matrix_dual_coefficients(mlab, lad, sp, n_max)))))
    gate(10, "duals and T-operators", {
        "canonical_dual": (can, 1e-12),
        "T_f": (t_err, 1e-12),
        "script_T_f": (s_err, 1e-12),
        "plus_sign_second_order": all(r.second_order and r.errors[0] < 1e-4 for r in ratios),
        "ratio_minus_4": (max(abs(r.ratio - 4) for r in ratios), 0.1),
    })


def test_criterion_11_temporal_stability():
    t = 0.73
    d = BURBAN
    p = ModelParams(2, 1, 1.0, 0.1, 1.0, Coupling(0.3, phase=0.3), d)
    lad = K_simple(d)
    sp = reorganized_spectrum(p, 60)
    lab = core.S2Label(0.6 + 0.5j, 0.2, -0.1, 0.7, 0.4)
    st = core.coefficients(lab, lad, sp, 50)
    s2 = float(np.max(np.abs(core.evolve(st, t).vector() - core.coefficients(lab.shifted(t), lad, sp, 50).vector())))
    du = dsp.dual_state(lab, lad, sp, 50)
    dual = float(np.max(np.abs(dsp.evolve_dual(du, t).vector() - dsp.dual_state(lab.shifted(-t), lad, sp, 50).vector())))
    mat = 0.0
    for mlab in (mx.NormalMatrixLabel(0.5 + 0.2j, -0.3 + 0.4j, mx.u2_from_angles(0.3, 0.8, 1.1), 0.2, -0.1),
                 mx.QuaternionLabel(0.8, 0.4, 0.9, 0.3, 0.2, -0.1)):
        ms_ = mx.matrix_coefficients(mlab, lad, sp, 50)
        mat = max(mat, float(np.max(np.abs(mx.matrix_evolve(ms_, t).M
                                           - mx.matrix_coefficients(mlab.shifted(t), lad, sp, 50).M))))
        mdu = dsp.matrix_dual_coefficients(mlab, lad, sp, 50)
        dual = max(dual, float(np.max(np.abs(dsp.evolve_matrix_dual(mdu, mlab, sp, t)
                                             - dsp.matrix_dual_coefficients(mlab.shifted(-t), lad, sp, 50)))))
    s3err = 0.0
    for k in (1, 2, 3):
        sp3 = reorganized_spectrum(ModelParams(k, 1, 1.0, 0.0, 1.0, Coupling(0.3)), 60)
        lab3 = s3.S3Label(0.7 + 0.4j, 0.7, 1.1, 0.5, 0.3, -0.2, 0.1)
        st3 = s3.s3_coefficients(lab3, K_action_identity(0.0), sp3, k, 60)
        s3err = max(s3err, float(np.max(np.abs(s3.s3_evolve(st3, t).vector()
                                               - s3.s3_coefficients(lab3.shifted(t), K_action_identity(0.0),
                                                                    sp3, k, 60).vector()))))
    gate(11, "temporal stability", {"S2": (s2, 1e-12), "matrix": (mat, 1e-12), "dual": (dual, 1e-12),
                                    "S3_with_tau_star": (s3err, 1e-12)})


def test_criterion_12_s3_family():
    lad = K_action_identity(0.0)
    norm, ident, audit, star = 0.0, 0.0, 0.0, 0.0
    for k in (1, 2, 3):
        sp = reorganized_spectrum(ModelParams(k, 1, 1.0, 0.0, 1.0, Coupling(0.3)), 80)
        for z in (0.1, 0.7 + 0.4j, 2.5j):
            st = s3.s3_coefficients(s3.S3Label(z, 0.7, 1.1, 0.5, 0.3, -0.2, 0.1), lad, sp, k, 80)
            norm = max(norm, max(abs(st.norm() - 1) - st.tail, 0.0))
        dens = s3.s3_densities("canonical-action", k)
        rep = s3.s3_resolution_check(lad, reorganized_spectrum(sp.params, 25), dens, k)
        ident = max(ident, rep.max_error)
        audit = max(audit, max(abs(v - 1) for v in rep.audit.values()))
        mrep = s3.s3_moment_check(dens, lad, k)
        star = max(star, max(r["rel_error"] for r in mrep.rows if r["sector"] == "*"))
    gate(12, "S3 family", {"normalization": (norm, 1e-12), "identity": (ident, 1e-4),
                           "audit": (audit, 1e-3), "star_moments": (star, 1e-8)})
