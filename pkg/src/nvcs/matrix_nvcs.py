"""Normal-matrix and quaternionic NVCSs.

A label is a 2x2 normal matrix Z = V diag(z, w) V^dag (or a quaternion
U diag(z, conj z) U^dag).  On level n the state attached to the spin vector
|s> is

    psi_s(n) = N(Z) V R0(n) exp(-i omega0 tau e_n) diag(z, w)^n V^dag |s>,

with R0(n) = diag(P_n^+/K0_+(n)!, P_n^-/K0_-(n)!).  The two components of
psi_s(n) are the amplitudes on |e_n^+> and |e_n^->.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import nvcs_core
from .errors import DomainError, RadiusError
from .ladder import BRANCHES, complex_K
from .quadrature import composite_nodes, interval_nodes, periodic_nodes
from .spectrum import passage_matrix, reorganized_spectrum

SIGMA3 = np.diag([1.0, -1.0]).astype(complex)


# ---------------------------------------------------------------------------
# group elements

def u_phi(phi):
    return np.diag([np.exp(0.5j * phi), np.exp(-0.5j * phi)])


def u_theta(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, 1j * s], [1j * s, c]])


def su2_from_angles(phi1, theta, phi2):
    """u_phi1 u_theta u_phi2."""
    return u_phi(phi1) @ u_theta(theta) @ u_phi(phi2)


def u2_from_angles(phi1, theta, phi2, global_phase=0.0):
    return np.exp(1j * global_phase) * su2_from_angles(phi1, theta, phi2)


def haar_nodes(n_theta=8, n_phi=8):
    """Euler-angle nodes on SU(2) with weights summing to one.

    The density sin(theta) dtheta dphi1 dphi2 / (16 pi^2) is integrated with
    Gauss-Legendre in cos(theta) and the trapezoid rule in phi1 in [0, 2 pi)
    and phi2 in [0, 4 pi).
    """
    x, wx = interval_nodes(-1.0, 1.0, n_theta)
    p1, w1 = periodic_nodes(n_phi)
    p2, w2 = periodic_nodes(n_phi)
    p2, w2 = 2 * p2, 2 * w2
    Us, ws = [], []
    for t, wt in zip(np.arccos(x), wx):
        for a, wa in zip(p1, w1):
            for b, wb in zip(p2, w2):
                Us.append(su2_from_angles(a, t, b))
                ws.append(wt * wa * wb / (16 * math.pi ** 2))
    return np.array(Us), np.array(ws)


def haar_average_projector(n_theta=8, n_phi=8, basis_index=0, global_phases=4):
    """int V |s><s| V^dag dOmega over U(2); the global U(1) phase is sampled too."""
    Us, ws = haar_nodes(n_theta, n_phi)
    e = np.zeros(2)
    e[basis_index] = 1.0
    out = np.zeros((2, 2), dtype=complex)
    for g in range(global_phases):
        ph = np.exp(2j * math.pi * g / global_phases)
        v = ph * Us[:, :, basis_index]
        out += np.einsum("g,ga,gb->ab", ws, v, v.conj()) / global_phases
    return out


# ---------------------------------------------------------------------------
# labels

def _lex_order(vals):
    return sorted(range(len(vals)), key=lambda i: (round(vals[i].real, 14), round(vals[i].imag, 14)))


@dataclass(frozen=True)
class NormalMatrixLabel:
    z: complex
    w: complex
    V: np.ndarray
    tau_plus: float = 0.0
    tau_minus: float = 0.0

    def __post_init__(self):
        V = np.asarray(self.V, dtype=complex)
        if V.shape != (2, 2) or np.max(np.abs(V.conj().T @ V - np.eye(2))) > 1e-12:
            raise DomainError("V must be a 2x2 unitary matrix")

    @property
    def matrix(self):
        return self.V @ np.diag([self.z, self.w]) @ self.V.conj().T

    @classmethod
    def from_matrix(cls, Z, tau_plus=0.0, tau_minus=0.0, tol=1e-12):
        """Diagonalize a normal matrix with eigenvalues in (real, imag) lexicographic order."""
        Z = np.asarray(Z, dtype=complex)
        if np.max(np.abs(Z.conj().T @ Z - Z @ Z.conj().T)) > tol * max(1.0, np.max(np.abs(Z)) ** 2):
            raise DomainError("label matrix is not normal")
        vals = np.linalg.eigvals(Z)
        if abs(vals[0] - vals[1]) <= tol * max(1.0, np.max(np.abs(vals))):
            lam = 0.5 * (vals[0] + vals[1])
            return cls(complex(lam), complex(lam), np.eye(2, dtype=complex), tau_plus, tau_minus)
        # Schur form of a normal matrix is diagonal with a unitary factor
        from scipy.linalg import schur
        T, Q = schur(Z, output="complex")
        d = np.diag(T)
        order = _lex_order(d)
        Q = Q[:, order]
        # fix the column phases so the first nonzero entry is real positive
        for j in range(2):
            i = int(np.argmax(np.abs(Q[:, j]) > 1e-12))
            Q[:, j] *= np.exp(-1j * np.angle(Q[i, j]))
        return cls(complex(d[order[0]]), complex(d[order[1]]), Q, tau_plus, tau_minus)

    def canonical(self):
        return NormalMatrixLabel.from_matrix(self.matrix, self.tau_plus, self.tau_minus)

    def shifted(self, t):
        return replace(self, tau_plus=self.tau_plus + t, tau_minus=self.tau_minus + t)


@dataclass(frozen=True)
class QuaternionLabel:
    r: float
    xi: float
    theta: float
    phi: float
    tau_plus: float = 0.0
    tau_minus: float = 0.0

    @property
    def z(self):
        return self.r * np.exp(1j * self.xi)

    @property
    def U(self):
        """U = u_{phi + pi/2} u_theta, so that U sigma3 U^dag = sigma."""
        return su2_from_angles(self.phi + math.pi / 2, self.theta, 0.0)

    @property
    def sigma(self):
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, np.exp(1j * self.phi) * s], [np.exp(-1j * self.phi) * s, -c]])

    @property
    def matrix(self):
        return quaternion_form(self)

    @property
    def V(self):
        return self.U

    @property
    def w(self):
        return np.conj(self.z)

    def shifted(self, t):
        return replace(self, tau_plus=self.tau_plus + t, tau_minus=self.tau_minus + t)


def quaternion_form(label, n=1):
    """Z^n = r^n (cos(n xi) I + i sin(n xi) sigma)."""
    return label.r ** n * (math.cos(n * label.xi) * np.eye(2) + 1j * math.sin(n * label.xi) * label.sigma)


# ---------------------------------------------------------------------------
# states

def _R0(ladder, n_max):
    """R0_+(n), R0_-(n) as (n_max+1, 2) array, with sign of the h products."""
    out = np.empty((n_max + 1, 2))
    for j, br in enumerate(BRANCHES):
        logK = ladder.log_K0_factorials(br, n_max)
        logP, sign = ladder.log_h_products(br, n_max)
        out[:, j] = sign * np.exp(logP - logK)
    return out


def _log_series_sum(ladder, branch, r):
    if r == 0:
        return 0.0
    N, _ = nvcs_core.norm_factor(ladder, branch, r)
    return -2 * math.log(N)


def matrix_norm(ladder, label):
    """N(Z) from N^-2 = sum |z|^2n R0_+^2 + |w|^2n R0_-^2 (quaternion: w = conj z)."""
    a = _log_series_sum(ladder, "+", abs(label.z))
    b = _log_series_sum(ladder, "-", abs(label.w))
    return math.exp(-0.5 * np.logaddexp(a, b))


def matrix_radii(ladder):
    """(L_+, L_-) with L = min for the quaternion family."""
    return nvcs_core.branch_radius(ladder, "+").value, nvcs_core.branch_radius(ladder, "-").value


@dataclass(frozen=True)
class MatrixNVCS:
    """Per-level coefficient matrices M_n = N V R0(n) e^{-i omega0 tau e_n} D^n V^dag.

    The state attached to |s> is the column M_n[:, s].
    """

    label: object
    M: np.ndarray
    norm: float
    ladder: object
    spectral: object
    kind: str

    @property
    def n_max(self):
        return self.M.shape[0] - 1

    def state(self, s):
        """(n_max+1, 2) amplitudes on (|e_n^+>, |e_n^->) for spin index s (0 is +)."""
        return self.M[:, :, s]

    def total_norm(self):
        return float(np.sum(np.abs(self.M) ** 2))


def _diag_powers(label, n_max, kind):
    n = np.arange(n_max + 1)
    z = complex(label.z)
    w = complex(np.conj(z)) if kind == "quaternion" else complex(label.w)
    with np.errstate(invalid="ignore"):
        pz = np.where(n == 0, 1.0, z ** n.astype(float)) if z != 0 else (n == 0).astype(complex)
        pw = np.where(n == 0, 1.0, w ** n.astype(float)) if w != 0 else (n == 0).astype(complex)
    return np.stack([pz, pw], axis=1)


def _check_radii(ladder, label, kind):
    Lp, Lm = matrix_radii(ladder)
    if kind == "quaternion":
        L = min(Lp, Lm)
        if math.isfinite(L) and label.r >= L:
            raise RadiusError(f"r = {label.r} is not inside L = {L}")
    else:
        if math.isfinite(Lp) and abs(label.z) >= Lp:
            raise RadiusError(f"|z| = {abs(label.z)} is not inside L_+ = {Lp}")
        if math.isfinite(Lm) and abs(label.w) >= Lm:
            raise RadiusError(f"|w| = {abs(label.w)} is not inside L_- = {Lm}")


def matrix_coefficients(label, ladder, spectral, n_max):
    kind = "quaternion" if isinstance(label, QuaternionLabel) else "normal"
    _check_radii(ladder, label, kind)
    if spectral.n_max < n_max:
        spectral = reorganized_spectrum(spectral.params, n_max)
    V = np.asarray(label.V, dtype=complex)
    R = _R0(ladder, n_max)
    w0 = spectral.params.omega0
    ph = np.stack([np.exp(-1j * w0 * label.tau_plus * spectral.e_plus[: n_max + 1]),
                   np.exp(-1j * w0 * label.tau_minus * spectral.e_minus[: n_max + 1])], axis=1)
    diag = R * ph * _diag_powers(label, n_max, kind)
    N = matrix_norm(ladder, label)
    M = N * np.einsum("ac,nc,bc->nab", V, diag, V.conj())
    return MatrixNVCS(label, M, N, ladder, spectral, kind)


def matrix_evolve(state, t):
    """Apply V exp(-i omega0 t H) V^dag level by level (the rotated propagator)."""
    sp = state.spectral
    n = state.n_max
    V = np.asarray(state.label.V, dtype=complex)
    e = np.stack([sp.e_plus[: n + 1], sp.e_minus[: n + 1]], axis=1)
    prop = np.einsum("ac,nc,bc->nab", V, np.exp(-1j * sp.params.omega0 * t * e), V.conj())
    M = np.einsum("nab,nbc->nac", prop, state.M)
    return replace(state, label=state.label.shifted(t), M=M)


def matrix_eigen_residual(state):
    """max |(M^-_V - Z_f) psi_s| over levels n <= n_max - 1 and s = +, -.

    M^-_V carries the temporal phases of the label on K.
    """
    lad, sp = state.ladder, state.spectral
    n = state.n_max
    V = np.asarray(state.label.V, dtype=complex)
    Ks = []
    for br, tau in zip(BRANCHES, (state.label.tau_plus, state.label.tau_minus)):
        Ks.append(complex_K(lad, br, n, sp, tau, sp.params.omega0))
    K = np.stack(Ks, axis=1)
    h = np.stack([lad.h(br, np.arange(n + 1)) for br in BRANCHES], axis=1)
    z = complex(state.label.z)
    w = complex(np.conj(z)) if state.kind == "quaternion" else complex(state.label.w)
    KV = np.einsum("ac,nc,bc->nab", V, K, V.conj())
    ZV = np.einsum("ac,nc,bc->nab", V, h * np.array([z, w]), V.conj())
    lhs = np.einsum("nab,nbs->nas", KV[1:], state.M[1:])
    rhs = np.einsum("nab,nbs->nas", ZV[:-1], state.M[:-1])
    return float(np.max(np.abs(lhs - rhs)))


def original_basis_state(state, spin, N=None):
    """frak U  calU  frak U^dag applied to the state, as a Fock-basis vector.

    The spin rotation frak U acts on (|n,+>, |n,->) at every n; calU is the
    passage operator.  Returns (vector, truncation).
    """
    params = state.spectral.params
    n = state.n_max
    N = n + params.k if N is None else N
    trunc = passage_matrix(params, N, reorganized_spectrum(params, N))
    V = np.asarray(state.label.V, dtype=complex)
    psi = np.zeros(2 * (N + 1), dtype=complex)
    amp = state.state(spin)
    psi[: n + 1] = amp[:, 0]
    psi[N + 1: N + 2 + n] = amp[:, 1]
    return _spin_rotate(V, trunc.U @ _spin_rotate(V.conj().T, psi, N), N), trunc


def _spin_rotate(V, psi, N):
    out = np.empty_like(psi)
    a, b = psi[: N + 1], psi[N + 1:]
    out[: N + 1] = V[0, 0] * a + V[0, 1] * b
    out[N + 1:] = V[1, 0] * a + V[1, 1] * b
    return out


def original_basis_expansion(state, spin, N=None):
    """Direct assembly: N sum_{n,c} frak U |e_n^c> R0_c(n) e^{-i omega0 tau_c e_n^c} Z_c^n (frak U^dag)_{c,s}."""
    params = state.spectral.params
    n_max = state.n_max
    N = n_max + params.k if N is None else N
    trunc = passage_matrix(params, N, reorganized_spectrum(params, N))
    V = np.asarray(state.label.V, dtype=complex)
    Vd = V.conj().T
    R = _R0(state.ladder, n_max)
    sp = state.spectral
    w0 = params.omega0
    z = complex(state.label.z)
    w = complex(np.conj(z)) if state.kind == "quaternion" else complex(state.label.w)
    out = np.zeros(2 * (N + 1), dtype=complex)
    for n in range(n_max + 1):
        for c, (br, tau, lam) in enumerate(zip(BRANCHES, (state.label.tau_plus, state.label.tau_minus), (z, w))):
            e = sp.e_plus[n] if br == "+" else sp.e_minus[n]
            col = trunc.U[:, n if br == "+" else N + 1 + n]
            amp = state.norm * R[n, c] * np.exp(-1j * w0 * tau * e) * (lam ** n if n else 1.0) * Vd[c, spin]
            out += amp * _spin_rotate(V, col, N)
    return out


# ---------------------------------------------------------------------------
# resolution of the identity

@dataclass(frozen=True)
class MatrixIdentityReport:
    deviation: np.ndarray
    max_error: float
    audit: float
    claimed_prefactor: float
    measure: str

    def to_dict(self):
        return {"max_error": self.max_error, "audit": self.audit,
                "claimed_prefactor": self.claimed_prefactor, "measure": self.measure}


def _group_average(A, Us, ws):
    """sum_g w_g U_g diag(A[n, m]) U_g^dag as a (2(n+1))^2 matrix in tower ordering."""
    Y = np.einsum("g,gac,nmc,gbc->namb", ws, Us, A, Us.conj())
    n1 = A.shape[0]
    out = np.empty((2 * n1, 2 * n1), dtype=complex)
    for a in range(2):
        for b in range(2):
            out[a * n1:(a + 1) * n1, b * n1:(b + 1) * n1] = Y[:, a, :, b]
    return out


def _phase_matrix(sp, n_max, tau):
    w0 = sp.params.omega0
    e = np.stack([sp.e_plus[: n_max + 1], sp.e_minus[: n_max + 1]], axis=1)
    ph = np.exp(-1j * w0 * np.asarray(tau)[None, :] * e)
    return ph[:, None, :] * ph[None, :, :].conj()


def _series_log(ladder, branch, r_nodes):
    return np.array([_log_series_sum(ladder, branch, float(r)) for r in r_nodes])


def normal_resolution_check(ladder, spectral, n_max=25, n_check=10, r_max=8.0, radial_order=24,
                            radial_panels=8, n_arg=64, haar=(6, 6), weight_scale=1.0, tau=(0.0, 0.0)):
    """Sum over s of int dmu |Z; s><Z; s| with dmu = (1/pi^2)(e^-r+^2 + e^-r-^2) r+ r- dr+ dr- dth+ dth- dOmega.

    N(Z)^2 is evaluated from its series at each radial node, so nothing
    cancels analytically.
    """
    r, wr = composite_nodes(0.0, r_max, radial_order, radial_panels)
    a, wa = periodic_nodes(n_arg)
    n = np.arange(n_max + 1)
    R = _R0(ladder, n_max)
    sp_log = _series_log(ladder, "+", r)
    sm_log = _series_log(ladder, "-", r)
    # N^2 on the (r+, r-) grid times the measure density
    logN2 = -np.logaddexp(sp_log[:, None], sm_log[None, :])
    dens = weight_scale * (np.exp(-r ** 2)[:, None] + np.exp(-r ** 2)[None, :]) / math.pi ** 2
    Wgrid = np.exp(logN2) * dens * (wr * r)[:, None] * (wr * r)[None, :]
    # angular factors int e^{i(n-m) theta} dtheta by the trapezoid rule
    F = np.einsum("t,tn,tm->nm", wa, np.exp(1j * np.outer(a, n)), np.exp(-1j * np.outer(a, n)))
    pw = r[:, None] ** n[None, :]
    Ap = np.einsum("ij,in,im->nm", Wgrid, pw, pw)
    Am = np.einsum("ij,jn,jm->nm", Wgrid, pw, pw)
    A = np.stack([Ap * R[:, None, 0] * R[None, :, 0], Am * R[:, None, 1] * R[None, :, 1]], axis=-1)
    # the other channel's angle integrates to sum(wa) = 2 pi
    A = A * F[:, :, None] * np.sum(wa) * _phase_matrix(spectral, n_max, tau)
    Us, ws = haar_nodes(*haar)
    Y = _group_average(A, Us, ws)
    return _identity_report(Y, n_max, n_check, 1.0 / math.pi ** 2, "normal")


def quaternion_resolution_check(ladder, spectral, n_max=25, n_check=10, r_max=8.0, radial_order=24,
                                radial_panels=8, n_arg=64, sphere=(8, 8), weight_scale=1.0, tau=(0.0, 0.0)):
    """Sum over s of int dmu |Z; s><Z; s| with dmu = N^-2 W(r) r dr dxi sin(theta) dtheta dphi / (4 pi).

    W(r) = e^{-r^2}/pi solves the moment problem of the simple class; the
    claimed closed form of the measure is (1/(2 pi^2)) r dr dxi sin(theta) dtheta dphi.
    """
    r, wr = composite_nodes(0.0, r_max, radial_order, radial_panels)
    a, wa = periodic_nodes(n_arg)
    n = np.arange(n_max + 1)
    R = _R0(ladder, n_max)
    # the N^-2 of the measure and the N^2 of the projector are kept separate
    logSinv = np.logaddexp(_series_log(ladder, "+", r), _series_log(ladder, "-", r))
    Ninv2 = np.exp(logSinv)
    N2 = np.exp(-logSinv)
    W = weight_scale * np.exp(-r ** 2) / math.pi
    wrad = wr * r * Ninv2 * W * N2
    pw = r[:, None] ** n[None, :]
    base = np.einsum("i,in,im->nm", wrad, pw, pw)
    Fp = np.einsum("t,tn,tm->nm", wa, np.exp(1j * np.outer(a, n)), np.exp(-1j * np.outer(a, n)))
    A = np.stack([base * Fp * R[:, None, 0] * R[None, :, 0], base * Fp.conj() * R[:, None, 1] * R[None, :, 1]], axis=-1)
    A = A * _phase_matrix(spectral, n_max, tau)
    x, wx = interval_nodes(-1.0, 1.0, sphere[0])
    ph, wph = periodic_nodes(sphere[1])
    Us, ws = [], []
    for t, wt in zip(np.arccos(x), wx):
        for p, wp in zip(ph, wph):
            Us.append(QuaternionLabel(1.0, 0.0, t, p).U)
            ws.append(wt * wp / (4 * math.pi))
    Y = _group_average(A, np.array(Us), np.array(ws))
    return _identity_report(Y, n_max, n_check, 1.0 / (2 * math.pi ** 2), "quaternion")


def _identity_report(Y, n_max, n_check, claimed, measure):
    idx = np.concatenate([np.arange(n_check + 1), n_max + 1 + np.arange(n_check + 1)])
    B = Y[np.ix_(idx, idx)]
    dev = B - np.eye(len(idx))
    audit = float(np.mean(np.real(np.diag(B))))
    return MatrixIdentityReport(dev, float(np.max(np.abs(dev))), audit, claimed, measure)
