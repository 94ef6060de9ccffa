"""S^2 family of nonlinear vector coherent states.

Coefficients on the tower basis are

    C_n^+ = N^+ cos(theta) z^n P_n^+ / K0_+(n)! exp(-i omega0 tau_+ e_n^+)
    C_n^- = N^- e^{i phi} sin(theta) z^n P_n^- / K0_-(n)! exp(-i omega0 tau_- e_n^-)

where P_n = h(n-1)! h(0) = prod_{j<n} h(j).  All magnitudes are built in
the log domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DivergenceError, DomainError, RadiusError
from .ladder import BRANCHES, annihilation_matrix, complex_K
from .spectrum import passage_matrix, reorganized_spectrum

SERIES_RTOL = 1e-12
SERIES_START = 64
SERIES_CAP = 1 << 16
RADIUS_LEVELS = (100, 200, 400)


@dataclass(frozen=True)
class S2Label:
    z: complex = 0j
    tau_plus: float = 0.0
    tau_minus: float = 0.0
    theta: float = 0.0
    phi: float = 0.0

    def tau(self, branch):
        return self.tau_plus if branch == "+" else self.tau_minus

    def shifted(self, t):
        return replace(self, tau_plus=self.tau_plus + t, tau_minus=self.tau_minus + t)

    def to_dict(self):
        return {"z": [self.z.real, self.z.imag], "tau_plus": self.tau_plus,
                "tau_minus": self.tau_minus, "theta": self.theta, "phi": self.phi}


# ---------------------------------------------------------------------------
# series helpers

def log_coefficient_magnitudes(ladder, branch, r, n_max):
    """log(r^n |P_n| / K0(n)!) and sign(P_n) for n = 0..n_max."""
    logK = ladder.log_K0_factorials(branch, n_max)
    logP, sign = ladder.log_h_products(branch, n_max)
    n = np.arange(n_max + 1)
    if r > 0:
        lead = n * math.log(r)
    else:
        lead = np.where(n == 0, 0.0, -np.inf)
    return lead + logP - logK, sign


def _geometric_tail(log_terms):
    """Upper bound on sum_{m>n} t_m relative to sum t from the last ratios, or None."""
    ratios = np.diff(log_terms[-16:])
    if not np.all(np.isfinite(ratios)):
        return 0.0 if np.all(log_terms[-8:] == -np.inf) else None
    if ratios[-1] >= 0 or np.any(np.diff(ratios) > 1e-12):
        return None
    rho = math.exp(ratios[-1])
    total = np.logaddexp.reduce(log_terms)
    return math.exp(log_terms[-1] - total) * rho / (1 - rho)


@dataclass(frozen=True)
class SeriesSum:
    log_sum: float
    tail: float
    n_terms: int


def log_series(log_terms_fn, n_start=0, rtol=SERIES_RTOL):
    """log sum_{n >= n_start} exp(log_terms_fn(n_max)[n]) with automatic length.

    The length doubles until a geometric bound on the neglected terms falls
    below rtol of the partial sum.
    """
    n_max = SERIES_START
    while n_max <= SERIES_CAP:
        lt = np.asarray(log_terms_fn(n_max))[n_start:]
        if np.any(lt > 700 + 2 * math.log(n_max)):
            raise DivergenceError("norm series exceeds the overflow guard")
        tail = _geometric_tail(lt)
        if tail is not None and tail < rtol:
            return SeriesSum(float(np.logaddexp.reduce(lt)), tail, n_max + 1)
        n_max *= 2
    raise DivergenceError("norm series did not settle; |z| is probably outside the radius")


def norm_factor(ladder, branch, r, n_start=0):
    """N(r) = (sum_{n >= n_start} r^{2n} P_n^2 / (K0(n)!)^2)^(-1/2) and the tail bound."""
    if r == 0:
        if n_start == 0:
            return 1.0, 0.0
        raise DomainError("series starting above n = 0 vanishes at z = 0")

    def lt(n_max):
        return 2 * log_coefficient_magnitudes(ladder, branch, r, n_max)[0]

    s = log_series(lt, n_start)
    return math.exp(-0.5 * s.log_sum), s.tail


def normalization(ladder, r):
    """(N^+, N^-) at |z| = r."""
    return tuple(norm_factor(ladder, br, r)[0] for br in BRANCHES)


@dataclass(frozen=True)
class RadiusEstimate:
    value: float
    uncertainty: float
    infinite: bool


@lru_cache(maxsize=256)
def branch_radius(ladder, branch):
    """lim K0(n)/|h(n-1)| from n <= 400 with Richardson extrapolation in 1/n."""
    n = np.array(RADIUS_LEVELS)
    ratio = ladder.K0(branch, n) / np.abs(ladder.h(branch, n - 1))
    if ratio[2] / ratio[1] > 1.1 or not np.isfinite(ratio[2]):
        return RadiusEstimate(math.inf, 0.0, True)
    r1 = 2 * ratio[1] - ratio[0]
    r2 = 2 * ratio[2] - ratio[1]
    return RadiusEstimate(float(r2), float(abs(r2 - r1)), False)


def convergence_radius(ladder):
    """(R_+, R_-, R) with R = min(R_+, R_-)."""
    rp = branch_radius(ladder, "+")
    rm = branch_radius(ladder, "-")
    return rp, rm, min(rp.value, rm.value)


def check_radius(ladder, r):
    R = convergence_radius(ladder)[2]
    if math.isfinite(R) and r >= R:
        raise RadiusError(f"|z| = {r} is not inside the disc of radius {R}")
    return R


# ---------------------------------------------------------------------------
# states

@dataclass(frozen=True)
class NVCSCoefficients:
    label: S2Label
    C_plus: np.ndarray
    C_minus: np.ndarray
    norm_plus: float
    norm_minus: float
    radius: tuple
    tail: float
    ladder: object
    spectral: object

    @property
    def n_max(self):
        return len(self.C_plus) - 1

    def coefficients(self, branch):
        return self.C_plus if branch == "+" else self.C_minus

    def vector(self):
        """Tower-basis vector (plus tower first)."""
        return np.concatenate([self.C_plus, self.C_minus])

    def norm(self):
        return float(np.sum(np.abs(self.C_plus) ** 2) + np.sum(np.abs(self.C_minus) ** 2))

    def to_dict(self):
        return {"label": self.label.to_dict(),
                "C_plus": [[c.real, c.imag] for c in self.C_plus],
                "C_minus": [[c.real, c.imag] for c in self.C_minus],
                "norms": [self.norm_plus, self.norm_minus], "radius": self.radius[2],
                "tail": self.tail}


def _temporal_phase(spectral, branch, tau, n_max):
    e = spectral.tower(branch)[: n_max + 1]
    return np.exp(-1j * spectral.params.omega0 * tau * e)


def _ensure_spectrum(spectral, n_max):
    if spectral.n_max < n_max:
        return reorganized_spectrum(spectral.params, n_max)
    return spectral


def branch_coefficients(ladder, branch, z, n_max, norm):
    """norm * z^n P_n / K0(n)! without angular weight or temporal phase."""
    r = abs(z)
    logmag, sign = log_coefficient_magnitudes(ladder, branch, r, n_max)
    n = np.arange(n_max + 1)
    mag = np.exp(logmag) * sign
    return norm * mag * np.exp(1j * n * np.angle(z)) if r > 0 else norm * mag.astype(complex)


def coefficients(label, ladder, spectral, n_max):
    """Truncated S^2 state |z; tau; theta, phi> on levels n <= n_max."""
    z = complex(label.z)
    R = check_radius(ladder, abs(z))
    spectral = _ensure_spectrum(spectral, n_max)
    Np, tail_p = norm_factor(ladder, "+", abs(z))
    Nm, tail_m = norm_factor(ladder, "-", abs(z))
    wp = math.cos(label.theta)
    wm = np.exp(1j * label.phi) * math.sin(label.theta)
    Cp = wp * branch_coefficients(ladder, "+", z, n_max, Np) * _temporal_phase(spectral, "+", label.tau_plus, n_max)
    Cm = wm * branch_coefficients(ladder, "-", z, n_max, Nm) * _temporal_phase(spectral, "-", label.tau_minus, n_max)
    missing = 1.0 - (np.sum(np.abs(Cp) ** 2) + np.sum(np.abs(Cm) ** 2))
    tail = max(missing, 0.0) + tail_p + tail_m
    radius = convergence_radius(ladder)
    return NVCSCoefficients(label, Cp, Cm, Np, Nm, (radius[0].value, radius[1].value, R), tail,
                            ladder, spectral)


def evolve(state, t):
    """Apply exp(-i omega0 t H): every level picks up exp(-i omega0 t e_n)."""
    sp = state.spectral
    n = state.n_max
    Cp = state.C_plus * _temporal_phase(sp, "+", t, n)
    Cm = state.C_minus * _temporal_phase(sp, "-", t, n)
    return replace(state, label=state.label.shifted(t), C_plus=Cp, C_minus=Cm)


def hamiltonian_expectation(state):
    jp, jm = action_variables(state)
    return jp + jm


def action_variables(state):
    """(J_+, J_-): the energy-weighted occupation of each tower."""
    sp = state.spectral
    n = state.n_max
    jp = float(np.sum(np.abs(state.C_plus) ** 2 * sp.e_plus[: n + 1]))
    jm = float(np.sum(np.abs(state.C_minus) ** 2 * sp.e_minus[: n + 1]))
    return jp, jm


def annihilation_residual(state, ladder=None, n_max=None):
    """max |(M^- - z Q) psi| over rows n <= n_max - 1 of each tower.

    M^- carries the temporal phases of the label so the state is its exact
    eigenvector; only rounding and the truncation edge contribute.
    """
    ladder = state.ladder if ladder is None else ladder
    N = state.n_max if n_max is None else n_max
    z = complex(state.label.z)
    worst = 0.0
    for br in BRANCHES:
        K = complex_K(ladder, br, N, state.spectral, state.label.tau(br), state.spectral.params.omega0)
        C = state.coefficients(br)[: N + 1]
        h = ladder.h(br, np.arange(N))
        res = K[1:] * C[1:] - z * h * C[:-1]
        scale = max(float(np.max(np.abs(C))), 1e-300)
        worst = max(worst, float(np.max(np.abs(res))) / scale if res.size else 0.0)
    return worst


def annihilation_residual_matrix(state, ladder=None):
    """Same residual computed with the assembled tower matrices (oracle path)."""
    ladder = state.ladder if ladder is None else ladder
    N = state.n_max
    M = annihilation_matrix(ladder, N, state.spectral, "tower",
                            (state.label.tau_plus, state.label.tau_minus)).matrix
    n = np.arange(N + 1)
    Q = np.concatenate([ladder.h("+", n), ladder.h("-", n)])
    v = state.vector()
    r = M @ v - complex(state.label.z) * Q * v
    rows = np.concatenate([np.arange(N), N + 1 + np.arange(N)])
    return float(np.max(np.abs(r[rows])))


def rabi_phase(params, spectral, n, t, label):
    """Psi_n(t) = omega0[(t+tau_+) e_n^+ - (t+tau_-) e_n^-] + phi - phi_lambda(n)."""
    w = params.omega0
    ep, em = spectral.e_plus[n], spectral.e_minus[n]
    return w * ((t + label.tau_plus) * ep - (t + label.tau_minus) * em) + label.phi - params.phase_lambda(n)


def level_splitting(spectral, n):
    """Delta e_n = e_n^+ - e_n^- (same label in both towers)."""
    return spectral.e_plus[n] - spectral.e_minus[n]


def pair_frequencies(spectral, n_max):
    """omega0 (e_n^+ - e_{n+k}^-) = 2 omega0 Q: the frequencies of <sigma_3(t)>."""
    n = np.arange(n_max + 1)
    return spectral.params.omega0 * spectral.pair_splitting(n)


def to_fock(state, N=None):
    """Fock-basis vector of a truncated state and the truncation used.

    The cutoff defaults to n_max + k so that every populated plus label has
    its partner inside the cutoff.
    """
    params = state.spectral.params
    N = state.n_max + params.k if N is None else N
    sp = _ensure_spectrum(state.spectral, N)
    trunc = passage_matrix(params, N, sp)
    c = np.zeros(2 * (N + 1), dtype=complex)
    n = state.n_max
    c[: n + 1] = state.C_plus
    c[N + 1: N + 2 + n] = state.C_minus
    return trunc.U @ c, trunc, c


def atomic_inversion(state, t_grid):
    """<sigma_3(t)> from the Fock representation evolved with the truncated propagator."""
    psi, trunc, c = to_fock(state)
    N = trunc.N
    w = state.spectral.params.omega0
    sigma = np.concatenate([np.ones(N + 1), -np.ones(N + 1)])
    out = np.empty(len(t_grid))
    norms = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        v = trunc.U @ (np.exp(-1j * w * t * trunc.energies) * c)
        out[i] = float(np.real(np.vdot(v, sigma * v)))
        norms[i] = float(np.real(np.vdot(v, v)))
    return out, norms
