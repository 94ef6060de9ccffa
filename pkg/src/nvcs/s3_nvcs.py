"""NVCSs labeled by S^3 unit vectors.

The k finite states e_q^- (q < k) form a third sector with its own angle:

    cos(theta1)            N_*  sum_{q<k}  z^q / K0_-(q)! e^{-i omega0 tau_* e_q^-} |e_q^->
  + sin(theta1)cos(theta2) N_-  sum_{n>=k} z^n / K0_-(n)! e^{-i omega0 tau_- e_n^-} |e_n^->
  + e^{i phi} sin(theta1)sin(theta2) N_+ sum_{n>=0} z^n / K0_+(n)! e^{-i omega0 tau_+ e_n^+} |e_n^+>

Only K0 enters; the h factors of the S^2 family are not part of this family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import nvcs_core
from .errors import ConvergenceError, DomainError, RadiusError
from .measures import moment_integral
from .quadrature import composite_nodes, interval_nodes, periodic_nodes
from .spectrum import reorganized_spectrum

SECTOR_FACTOR = {"*": 8 * math.pi ** 2 / 3, "-": 16 * math.pi ** 2 / 9, "+": 32 * math.pi ** 2 / 9}


@dataclass(frozen=True)
class S3Label:
    z: complex = 0j
    theta1: float = 0.0
    theta2: float = 0.0
    phi: float = 0.0
    tau_star: float = 0.0
    tau_plus: float = 0.0
    tau_minus: float = 0.0

    def shifted(self, t):
        return replace(self, tau_star=self.tau_star + t, tau_plus=self.tau_plus + t,
                       tau_minus=self.tau_minus + t)

    def weights(self):
        """Sector amplitudes (star, minus, plus)."""
        s1 = math.sin(self.theta1)
        return (math.cos(self.theta1), s1 * math.cos(self.theta2),
                np.exp(1j * self.phi) * s1 * math.sin(self.theta2))

    def to_dict(self):
        return {"z": [complex(self.z).real, complex(self.z).imag], "theta1": self.theta1,
                "theta2": self.theta2, "phi": self.phi, "tau_star": self.tau_star,
                "tau_plus": self.tau_plus, "tau_minus": self.tau_minus}


def _log_mag(ladder, branch, r, n_max):
    """log(r^n / K0(n)!) for n = 0..n_max."""
    logK = ladder.log_K0_factorials(branch, n_max)
    n = np.arange(n_max + 1)
    if r == 0:
        return np.where(n == 0, 0.0, -np.inf)
    return n * math.log(r) - logK


def s3_log_norms(ladder, k, r):
    """(log N_*, log N_-, log N_+) and the tail bound of the two infinite series."""
    if k < 1:
        raise DomainError("the S^3 family needs k >= 1")
    lm = _log_mag(ladder, "-", r, k - 1)
    Ls = -0.5 * float(np.logaddexp.reduce(2 * lm))
    if r == 0:
        # the minus series starts at n = k and vanishes at the origin
        return Ls, math.inf, 0.0, 0.0
    sm = nvcs_core.log_series(lambda n: 2 * _log_mag(ladder, "-", r, n), n_start=k)
    sp = nvcs_core.log_series(lambda n: 2 * _log_mag(ladder, "+", r, n))
    return Ls, -0.5 * sm.log_sum, -0.5 * sp.log_sum, sm.tail + sp.tail


def s3_norms(ladder, k, r):
    """(N_*, N_-, N_+) and the tail bound; N_- is inf when it overflows (r -> 0)."""
    Ls, Lm, Lp, tail = s3_log_norms(ladder, k, r)
    Nm = math.exp(Lm) if Lm < 700 else math.inf
    return math.exp(Ls), Nm, math.exp(Lp), tail


@dataclass(frozen=True)
class S3Coefficients:
    label: S3Label
    k: int
    C_plus: np.ndarray
    C_minus: np.ndarray
    norms: tuple
    tail: float
    ladder: object
    spectral: object

    @property
    def n_max(self):
        return len(self.C_plus) - 1

    @property
    def C_star(self):
        return self.C_minus[: self.k]

    def vector(self):
        return np.concatenate([self.C_plus, self.C_minus])

    def norm(self):
        return float(np.sum(np.abs(self.vector()) ** 2))

    def to_dict(self):
        return {"label": self.label.to_dict(), "k": self.k, "norms": list(self.norms),
                "tail": self.tail,
                "C_plus": [[c.real, c.imag] for c in self.C_plus],
                "C_minus": [[c.real, c.imag] for c in self.C_minus]}


def s3_coefficients(label, ladder, spectral, k, n_max):
    if n_max < k:
        raise DomainError("n_max must reach the minus tower (n_max >= k)")
    z = complex(label.z)
    r = abs(z)
    R = nvcs_core.convergence_radius(ladder)[2]
    if math.isfinite(R) and r >= R:
        raise RadiusError(f"|z| = {r} is not inside R = {R}")
    if spectral.n_max < n_max:
        spectral = reorganized_spectrum(spectral.params, n_max)
    Ls, Lm, Lp, tail = s3_log_norms(ladder, k, r)
    ws, wm, wp = label.weights()
    w0 = spectral.params.omega0
    n = np.arange(n_max + 1)
    arg = np.exp(1j * n * np.angle(z))
    log_m = _log_mag(ladder, "-", r, n_max)
    log_p = _log_mag(ladder, "+", r, n_max)
    em = spectral.e_minus[: n_max + 1]
    ep = spectral.e_plus[: n_max + 1]
    Cm = np.empty(n_max + 1, dtype=complex)
    Cm[:k] = ws * np.exp(Ls + log_m[:k]) * arg[:k] * np.exp(-1j * w0 * label.tau_star * em[:k])
    if math.isfinite(Lm):
        # N_- r^n is formed in logs: N_- alone overflows as r -> 0
        Cm[k:] = wm * np.exp(Lm + log_m[k:]) * arg[k:] * np.exp(-1j * w0 * label.tau_minus * em[k:])
    else:
        Cm[k:] = 0.0
    Cp = wp * np.exp(Lp + log_p) * arg * np.exp(-1j * w0 * label.tau_plus * ep)
    missing = 1.0 - (np.sum(np.abs(Cp) ** 2) + np.sum(np.abs(Cm) ** 2))
    norms = (math.exp(Ls), math.exp(Lm) if Lm < 700 else math.inf, math.exp(Lp))
    return S3Coefficients(label, k, Cp, Cm, norms, max(missing, 0.0) + tail, ladder, spectral)


def s3_evolve(state, t):
    """exp(-i omega0 t H): all three time labels move by t."""
    sp = state.spectral
    n = state.n_max
    w0 = sp.params.omega0
    Cp = state.C_plus * np.exp(-1j * w0 * t * sp.e_plus[: n + 1])
    Cm = state.C_minus * np.exp(-1j * w0 * t * sp.e_minus[: n + 1])
    return replace(state, label=state.label.shifted(t), C_plus=Cp, C_minus=Cm)


def s3_action_variables(state):
    """(J_*, J_-, J_+) as energy-weighted sector occupations."""
    sp = state.spectral
    n = state.n_max
    k = state.k
    pm = np.abs(state.C_minus) ** 2 * sp.e_minus[: n + 1]
    pp = np.abs(state.C_plus) ** 2 * sp.e_plus[: n + 1]
    return float(np.sum(pm[:k])), float(np.sum(pm[k:])), float(np.sum(pp))


def s3_action_closed_form(label, k, scale, a_minus, a_plus):
    """Exact sums for K0(n) = sqrt(s n) and affine towers e_n^- = a_- + s n, e_n^+ = a_+ + s n.

    With t_q = r^2q / (s^q q!):
        J_* = c^2 (a_- + r^2 - r^2 t_{k-1} N_*^2)
        J_- = w^2 (a_- + r^2 + r^2 t_{k-1} N_-^2)
        J_+ = v^2 (a_+ + r^2)
    """
    r2 = abs(complex(label.z)) ** 2
    s = scale
    q = np.arange(k)
    t = r2 ** q / (s ** q * np.array([math.factorial(int(j)) for j in q]))
    Nstar2 = 1.0 / np.sum(t)
    tk = t[-1]
    Nm_inv2 = math.exp(r2 / s) - np.sum(t)
    ws, wm, wp = label.weights()
    Js = ws ** 2 * (a_minus + r2 - r2 * tk * Nstar2)
    Jm = wm ** 2 * (a_minus + r2 + (r2 * tk / Nm_inv2 if Nm_inv2 > 0 else 0.0))
    Jp = abs(wp) ** 2 * (a_plus + r2)
    return float(Js), float(Jm), float(Jp)


def s3_action_claimed(label, spectral):
    """The action-identity forms c^2(r^2 + e_0^-), w^2(r^2 + e_k^-), v^2(r^2 + e_0^+)."""
    r2 = abs(complex(label.z)) ** 2
    ws, wm, wp = label.weights()
    k = spectral.params.k
    return (ws ** 2 * (r2 + spectral.e_minus[0]), wm ** 2 * (r2 + spectral.e_minus[k]),
            abs(wp) ** 2 * (r2 + spectral.e_plus[0]))


# ---------------------------------------------------------------------------
# densities and moments

@dataclass(frozen=True)
class S3Densities:
    h_star: Callable
    h_minus: Callable
    h_plus: Callable
    W_star: Callable
    W_minus: Callable
    W_plus: Callable
    k: int
    name: str = "custom"

    def h(self, sector):
        return {"*": self.h_star, "-": self.h_minus, "+": self.h_plus}[sector]

    def W(self, sector):
        return {"*": self.W_star, "-": self.W_minus, "+": self.W_plus}[sector]


def s3_densities(cls, k, detuning=0.0, ladder=None, h=None):
    """Densities and weights of the S^3 measure.

    cls "canonical-action": h = e^{-u/s}/s with s = 1 + detuning and the
    closed-form weights W_* = 3 e^{-r^2/s} N_*^-2 / (8 pi^2 s),
    W_- = 9 (1 - e^{-r^2/s} N_*^-2) / (16 pi^2 s), W_+ = 9 / (32 pi^2 s).
    cls "derived": a common density ``h`` and weights W = h / (c N^2) from the
    norm factors of ``ladder``.
    """
    if k < 1:
        raise DomainError("the S^3 family needs k >= 1")
    if cls == "canonical-action":
        s = 1.0 + detuning
        if not s > 0:
            raise DomainError("1 + detuning must be positive")

        def hfun(u):
            return np.exp(-np.asarray(u, dtype=float) / s) / s

        def star_inv2(r):
            r2 = np.asarray(r, dtype=float) ** 2
            return sum(r2 ** q / (s ** q * math.factorial(q)) for q in range(k))

        def Ws(r):
            return 3 * np.exp(-np.asarray(r, dtype=float) ** 2 / s) * star_inv2(r) / (8 * math.pi ** 2 * s)

        def Wm(r):
            return 9 * (1 - np.exp(-np.asarray(r, dtype=float) ** 2 / s) * star_inv2(r)) / (16 * math.pi ** 2 * s)

        def Wp(r):
            return np.full(np.shape(r), 9 / (32 * math.pi ** 2 * s))

        return S3Densities(hfun, hfun, hfun, Ws, Wm, Wp, k, cls)
    if cls == "derived":
        if ladder is None or h is None:
            raise DomainError("derived weights need a ladder and a density")

        def make(sector):
            def W(r):
                r = np.atleast_1d(np.asarray(r, dtype=float))
                out = np.empty_like(r)
                for i, x in enumerate(r):
                    Ns, Nm, Np, _ = s3_norms(ladder, k, float(x))
                    N = {"*": Ns, "-": Nm, "+": Np}[sector]
                    out[i] = 0.0 if not math.isfinite(N) else h(x * x) / (SECTOR_FACTOR[sector] * N ** 2)
                return out
            return W

        return S3Densities(h, h, h, make("*"), make("-"), make("+"), k, cls)
    raise DomainError(f"unknown density class {cls!r}")


@dataclass(frozen=True)
class S3MomentReport:
    rows: tuple
    informational: tuple
    rel_tol: float

    @property
    def passed(self):
        return all(r["passed"] for r in self.rows)

    @property
    def max_error(self):
        return max(r["rel_error"] for r in self.rows)

    def to_dict(self):
        return {"rel_tol": self.rel_tol, "passed": self.passed, "rows": list(self.rows),
                "informational": list(self.informational)}


def s3_moment_check(densities, ladder, k, n_check=15, rel_tol=1e-8, n_info=3):
    """Star moments for n <= k-1, minus for k <= n <= n_check, plus for n <= n_check.

    Star moments above k-1 are computed and reported as informational rows
    only; the k-dimensional sector imposes exactly k conditions.
    """
    logm = ladder.log_K0_factorials("-", n_check + n_info + k)
    logp = ladder.log_K0_factorials("+", n_check)
    rows, info = [], []

    def row(sector, n, target):
        try:
            val = moment_integral(densities.h(sector), n)
        except ConvergenceError:
            val = 0.0
        err = abs(val - target) / target
        return {"sector": sector, "n": n, "target": target, "computed": val,
                "rel_error": err, "passed": bool(err <= rel_tol)}

    for n in range(k):
        rows.append(row("*", n, math.exp(2 * logm[n])))
    for n in range(k, k + n_info):
        info.append(row("*", n, math.exp(2 * logm[n])))
    for n in range(k, n_check + 1):
        rows.append(row("-", n, math.exp(2 * logm[n])))
    for n in range(n_check + 1):
        rows.append(row("+", n, math.exp(2 * logp[n])))
    return S3MomentReport(tuple(rows), tuple(info), rel_tol)


@dataclass(frozen=True)
class S3IdentityReport:
    deviation: np.ndarray
    max_error: float
    audit: dict

    def to_dict(self):
        return {"max_error": self.max_error, "audit": self.audit}


def s3_resolution_check(ladder, spectral, densities, k, n_max=25, n_check=10, r_max=8.0,
                        radial_order=16, radial_panels=8, n_arg=32, n_theta=4, n_phi=4,
                        weight_scale=1.0):
    """int dmu D^1/2 |state><state| D^1/2 over D_R x S^3.

    dmu = sin(theta1) sin(theta2) d^2z dtheta1 dtheta2 dphi and D carries W_*,
    W_-, W_+ on the star sector, the minus tower (n >= k) and the plus tower.
    """
    R = nvcs_core.convergence_radius(ladder)[2]
    r, wr = composite_nodes(0.0, min(r_max, R), radial_order, radial_panels)
    a, wa = periodic_nodes(n_arg)
    x, wx = interval_nodes(-1.0, 1.0, n_theta)
    ph, wph = periodic_nodes(n_phi)
    n = np.arange(n_max + 1)
    # radial profiles with norms and square-root weights
    prof_m = np.empty((len(r), n_max + 1))
    prof_p = np.empty((len(r), n_max + 1))
    for i, ri in enumerate(r):
        Ns, Nm, Np, _ = s3_norms(ladder, k, float(ri))
        Nm = 0.0 if not math.isfinite(Nm) else Nm
        lm = np.exp(_log_mag(ladder, "-", float(ri), n_max))
        lp = np.exp(_log_mag(ladder, "+", float(ri), n_max))
        ws = math.sqrt(weight_scale * max(float(densities.W_star(ri)), 0.0))
        wm = math.sqrt(weight_scale * max(float(densities.W_minus(ri)), 0.0))
        wp = math.sqrt(weight_scale * max(float(densities.W_plus(ri)), 0.0))
        prof_m[i, :k] = ws * Ns * lm[:k]
        prof_m[i, k:] = wm * Nm * lm[k:]
        prof_p[i] = wp * Np * lp
    w0 = spectral.params.omega0
    ang = np.exp(1j * np.outer(a, n))
    c1 = x
    s1 = np.sqrt(1 - x ** 2)
    # sector factors on the (theta1, theta2, phi) grid
    A_star = c1[:, None, None] * np.ones((1, len(x), len(ph)))
    A_minus = s1[:, None, None] * x[None, :, None] * np.ones((1, 1, len(ph)))
    A_plus = (s1[:, None, None] * np.sqrt(1 - x ** 2)[None, :, None]
              * np.exp(1j * ph)[None, None, :])
    ang_w = wx[:, None, None] * wx[None, :, None] * wph[None, None, :]
    sector = np.zeros(n_max + 1, dtype=int)
    sector[k:] = 1
    Am = np.where(sector[None, None, None, :] == 0, A_star[..., None], A_minus[..., None])
    dim = 2 * (n_max + 1)
    Y = np.zeros((dim, dim), dtype=complex)
    rw = wr * r
    for i in range(len(r)):
        vp = prof_p[i][None, :] * ang                         # (arg, n)
        vm = prof_m[i][None, :] * ang
        psi_p = vp[:, None, None, None, :] * A_plus[None, ..., None]
        psi_m = vm[:, None, None, None, :] * Am[None]
        psi = np.concatenate([psi_p, psi_m], axis=-1).reshape(-1, dim)
        w = (rw[i] * wa[:, None, None, None] * ang_w[None]).ravel()
        Y += (psi.T * w) @ psi.conj()
    idx = np.concatenate([np.arange(n_check + 1), n_max + 1 + np.arange(n_check + 1)])
    B = Y[np.ix_(idx, idx)]
    dev = B - np.eye(len(idx))
    m = n_check + 1
    d = np.real(np.diag(B))
    audit = {"+": float(np.mean(d[:m])), "*": float(np.mean(d[m:m + k])),
             "-": float(np.mean(d[m + k:]))}
    return S3IdentityReport(dev, float(np.max(np.abs(dev))), audit)
