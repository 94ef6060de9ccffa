"""Stieltjes moment problems behind the resolution of the identity.

For each tower the overcompleteness condition reduces to

    int_0^{R^2} u^n h(u) du = (K0(n)!)^2 / P_n^2,    P_n = prod_{j<n} h_f(j),

with h^+(r^2) = (4 pi^2/3) N_+(r)^2 W_+(r) and h^-(r^2) = (8 pi^2/3) N_-(r)^2 W_-(r).
The constants come from the S^2 angular integrals of cos^2 and sin^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import nvcs_core
from .deformed_algebra import MultiParam, log_pq_exponential_neg, ramanujan_moment
from .errors import ConvergenceError, DomainError
from .ladder import BRANCHES
from .quadrature import (composite_nodes, integrate, integrate_semi_infinite,
                         interval_nodes, periodic_nodes)

ANGULAR_FACTOR = {"+": 4 * math.pi ** 2 / 3, "-": 8 * math.pi ** 2 / 3}


# ---------------------------------------------------------------------------
# moment problems

def log_target_moments(ladder, branch, n_max):
    """log of (K0(n)!)^2 / P_n^2 for n = 0..n_max."""
    logK = ladder.log_K0_factorials(branch, n_max)
    logP, _ = ladder.log_h_products(branch, n_max)
    return 2 * (logK - logP)


def target_moments(ladder, n, branch="+"):
    return float(math.exp(log_target_moments(ladder, branch, int(n))[int(n)]))


@dataclass(frozen=True)
class MomentProblem:
    target: Callable[[int], float]
    upper_limit: float = math.inf
    family: str = "+"

    @classmethod
    def from_ladder(cls, ladder, branch="+", upper_limit=math.inf):
        return cls(lambda n: target_moments(ladder, n, branch), upper_limit, branch)


# ---------------------------------------------------------------------------
# densities

@dataclass(frozen=True)
class Density:
    """Radial density h(u) together with the claimed tower weights W_+, W_-.

    ``weights`` maps a branch to a function of r, or is empty when the
    weights are to be derived from h and the norm factors.
    """

    name: str
    h: Callable
    weights: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __call__(self, u):
        return self.h(np.asarray(u, dtype=float))

    def weight(self, branch, r, ladder=None):
        """W(r); derived from h(r^2) / (c N(r)^2) when no closed form is stored."""
        if branch in self.weights:
            return np.broadcast_to(self.weights[branch](np.asarray(r, dtype=float)), np.shape(r)).astype(float)
        if ladder is None:
            raise DomainError("deriving a weight needs the ladder")
        r = np.atleast_1d(np.asarray(r, dtype=float))
        N = np.array([nvcs_core.norm_factor(ladder, branch, float(x))[0] for x in r])
        return self(r ** 2) / (ANGULAR_FACTOR[branch] * N ** 2)


def exp_density():
    return Density("exp", lambda u: np.exp(-u))


def scaled_exp_density(s):
    if not s > 0:
        raise DomainError("scale must be positive")
    return Density("scaled-exp", lambda u: np.exp(-u / s) / s, params={"s": s})


def custom_density(fn, name="custom"):
    return Density(name, fn)


def density_simple():
    """h(u) = e^-u with W_+ = 3/(4 pi^2), W_- = 3/(8 pi^2)."""
    d = exp_density()
    w = {"+": lambda r: 3.0 / (4 * math.pi ** 2), "-": lambda r: 3.0 / (8 * math.pi ** 2)}
    return Density("simple", d.h, w)


def density_canonical_action(detuning):
    """h(u) = e^{-u/(1+eps)}/(1+eps) with W_+ = 3/(4 pi^2 (1+eps)), W_- = 3/(8 pi^2 (1+eps))."""
    s = 1.0 + detuning
    d = scaled_exp_density(s)
    w = {"+": lambda r: 3.0 / (4 * math.pi ** 2 * s), "-": lambda r: 3.0 / (8 * math.pi ** 2 * s)}
    return Density("canonical-action", d.h, w, {"detuning": detuning})


def pq_density_constants(spec, mu, nu, l=1.0):
    """(Phi, Psi) for the (p,q) class.

    Psi = phi1 / (D l) with D = p^-ell - q^ell and
    Phi = q^(alpha - xi) p^(-2 nu - beta) Psi.
    """
    psi = spec.phi1_value / (spec.denominator * l)
    phi = spec.q ** (spec.alpha - spec.xi) * spec.p ** (-2 * nu - spec.beta) * psi
    return phi, psi


def check_pq_relations(spec, mu, nu, tol=1e-12):
    """The density is exact when xi/2 + mu = alpha/2, rho/2 + nu = 0 and ell = alpha."""
    bad = []
    if abs(spec.xi / 2 + mu - spec.alpha / 2) > tol:
        bad.append("xi/2 + mu = alpha/2")
    if abs(spec.rho / 2 + nu) > tol:
        bad.append("rho/2 + nu = 0")
    if abs(spec.ell - spec.alpha) > tol:
        bad.append("ell = alpha")
    if not spec.ground_cancels():
        bad.append("beta = k0")
    if bad:
        raise DomainError("(p,q) density needs " + ", ".join(bad))


def density_pq(spec, mu, nu, l=1.0):
    """h(u) = Phi^-1 / log(1/(pq)^alpha) * e_(P,Q)(-u Phi^-1 P^-1/2) with P = p^alpha, Q = q^alpha."""
    if not isinstance(spec, MultiParam):
        raise DomainError("density_pq needs a MultiParam deformation")
    check_pq_relations(spec, mu, nu)
    phi, psi = pq_density_constants(spec, mu, nu, l)
    P, Q = spec.p ** spec.alpha, spec.q ** spec.alpha
    lead = -math.log(phi) - math.log(math.log(1.0 / (P * Q)))

    def h(u):
        u = np.asarray(u, dtype=float)
        return np.exp(lead + log_pq_exponential_neg(P, Q, u / phi))

    return Density("pq", h, params={"Phi": phi, "Psi": psi, "P": P, "Q": Q})


def pq_norm_argument(spec, mu, nu, l, r):
    """x with N^-2 = E^(1/2,0)_(p^alpha,q^alpha)(x): x = r^2 q^(xi - alpha/2) p^(beta + 2 nu) D l / phi1."""
    return (r ** 2 * spec.q ** (spec.xi - spec.alpha / 2) * spec.p ** (spec.beta + 2 * nu)
            * spec.denominator * l / spec.phi1_value)


# ---------------------------------------------------------------------------
# verification

@dataclass(frozen=True)
class MomentRow:
    n: int
    target: float
    computed: float
    rel_error: float
    passed: bool


@dataclass(frozen=True)
class MomentVerification:
    density: str
    family: str
    rel_tol: float
    rows: tuple

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    @property
    def max_error(self):
        return max(r.rel_error for r in self.rows)

    def to_dict(self):
        return {"density": self.density, "family": self.family, "rel_tol": self.rel_tol,
                "passed": self.passed,
                "rows": [{"n": r.n, "target": r.target, "computed": r.computed,
                          "rel_error": r.rel_error, "passed": r.passed} for r in self.rows]}


def moment_integral(density, n, upper_limit=math.inf, rtol=1e-13):
    """int_0^U u^n h(u) du by adaptive Gauss-Legendre."""
    def f(u):
        return u ** n * density(u)
    if math.isinf(upper_limit):
        scale = max(1.0, float(n))
        val, _ = integrate_semi_infinite(f, scale=scale, rtol=rtol)
    else:
        val, _ = integrate(f, 0.0, upper_limit, rtol=rtol)
    return float(val)


def verify_moments(density, problem, n_check, rel_tol):
    rows = []
    for n in range(n_check + 1):
        target = float(problem.target(n))
        try:
            computed = moment_integral(density, n, problem.upper_limit)
        except ConvergenceError:
            computed = math.nan
        err = abs(computed - target) / abs(target) if math.isfinite(computed) else math.inf
        rows.append(MomentRow(n, target, computed, err, bool(err <= rel_tol)))
    return MomentVerification(density.name, problem.family, rel_tol, tuple(rows))


def weight_identity_error(density, ladder, r_grid):
    """max relative defect of h(r^2) = c N(r)^2 W(r) for both towers."""
    worst = 0.0
    r_grid = np.asarray(r_grid, dtype=float)
    for br in BRANCHES:
        N = np.array([nvcs_core.norm_factor(ladder, br, float(r))[0] for r in r_grid])
        lhs = density(r_grid ** 2)
        rhs = ANGULAR_FACTOR[br] * N ** 2 * density.weight(br, r_grid, ladder)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.abs(lhs))))
    return worst


def ramanujan_quadrature(p, q, lam0, n, rtol=1e-13):
    """int_0^inf t^n e_(p,q)(-lam0 p^-1/2 t) dt with the product form of the exponential."""
    def f(t):
        return t ** n * np.exp(log_pq_exponential_neg(p, q, lam0 * np.asarray(t)))
    val, _ = integrate_semi_infinite(f, scale=max(1.0, n) / lam0, rtol=rtol)
    return float(val)


def ramanujan_check(p, q, lam0, n):
    """(quadrature, closed form, relative error)."""
    quad = ramanujan_quadrature(p, q, lam0, n)
    closed = ramanujan_moment(p, q, lam0, n)
    return quad, closed, abs(quad - closed) / closed


# ---------------------------------------------------------------------------
# resolution of the identity on the S^2 family

@dataclass(frozen=True)
class IdentityGrid:
    """Radial Gauss-Legendre panels on [0, r_max] and angular grids.

    arg z and phi use the trapezoid rule; theta uses Gauss-Legendre in cos(theta).
    """

    r_max: float = 8.0
    radial_panels: int = 8
    radial_order: int = 16
    n_arg: int = 32
    n_theta: int = 4
    n_phi: int = 4

    def refined(self):
        return IdentityGrid(self.r_max, 2 * self.radial_panels, self.radial_order,
                            self.n_arg, self.n_theta, self.n_phi)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class IdentityReport:
    deviation: np.ndarray
    max_diagonal_error: float
    max_offdiagonal: float
    audit: dict
    grid: IdentityGrid
    n_check: int

    @property
    def max_error(self):
        return max(self.max_diagonal_error, self.max_offdiagonal)

    def to_dict(self):
        return {"max_diagonal_error": self.max_diagonal_error,
                "max_offdiagonal": self.max_offdiagonal, "audit": self.audit,
                "grid": self.grid.to_dict(), "n_check": self.n_check}


def _radial_parts(ladder, r_nodes, n_max):
    """N(r) r^n P_n / K0(n)! for each tower, shape (len(r), n_max+1)."""
    out = {}
    for br in BRANCHES:
        rows = []
        for r in r_nodes:
            N, _ = nvcs_core.norm_factor(ladder, br, float(r))
            logmag, sign = nvcs_core.log_coefficient_magnitudes(ladder, br, float(r), n_max)
            rows.append(N * sign * np.exp(logmag))
        out[br] = np.array(rows)
    return out


def _identity_block(Y, n_max, n_check):
    idx = np.concatenate([np.arange(n_check + 1), n_max + 1 + np.arange(n_check + 1)])
    return Y[np.ix_(idx, idx)]


def integrate_projectors(ladder, spectral, density, n_max, grid, tau=(0.0, 0.0)):
    """int dmu D^1/2 |state><state| D^1/2 over D_R x S^2, D = W_+ P_+ + W_- P_-.

    Returns the (2 n_max + 2)-square matrix in the tower basis.
    """
    R = nvcs_core.convergence_radius(ladder)[2]
    r_max = min(grid.r_max, R)
    r, wr = composite_nodes(0.0, r_max, grid.radial_order, grid.radial_panels)
    a, wa = periodic_nodes(grid.n_arg)
    ct, wt = interval_nodes(-1.0, 1.0, grid.n_theta)
    ph, wp = periodic_nodes(grid.n_phi)
    radial = _radial_parts(ladder, r, n_max)
    n = np.arange(n_max + 1)
    # theta enters through x = cos(theta), so sin(theta) d(theta) = dx
    cos_t = ct
    sin_t = np.sqrt(1 - ct ** 2)
    phase_p = np.exp(-1j * spectral.params.omega0 * tau[0] * spectral.e_plus[: n_max + 1])
    phase_m = np.exp(-1j * spectral.params.omega0 * tau[1] * spectral.e_minus[: n_max + 1])
    Wp = np.sqrt(density.weight("+", r, ladder))
    Wm = np.sqrt(density.weight("-", r, ladder))
    ang = np.exp(1j * np.outer(a, n))                       # (arg, n)
    # plus part: (r, arg, theta, phi, n)
    plus = (Wp[:, None] * radial["+"])[:, None, :] * ang[None] * phase_p
    minus = (Wm[:, None] * radial["-"])[:, None, :] * ang[None] * phase_m
    tp = cos_t[:, None] * np.ones_like(ph)[None, :]
    tm = sin_t[:, None] * np.exp(1j * ph)[None, :]
    psi_p = plus[:, :, None, None, :] * tp[None, None, :, :, None]
    psi_m = minus[:, :, None, None, :] * tm[None, None, :, :, None]
    psi = np.concatenate([psi_p, psi_m], axis=-1)
    w = (wr * r)[:, None, None, None] * wa[None, :, None, None] * wt[None, None, :, None] * wp[None, None, None, :]
    psi = psi.reshape(-1, psi.shape[-1])
    w = w.ravel()
    return (psi.T * w) @ psi.conj()


def resolution_of_identity_check(ladder, spectral, density, n_max=25, n_check=10,
                                 grid=None, tau=(0.0, 0.0)):
    grid = IdentityGrid() if grid is None else grid
    Y = integrate_projectors(ladder, spectral, density, n_max, grid, tau)
    B = _identity_block(Y, n_max, n_check)
    dev = B - np.eye(B.shape[0])
    diag = float(np.max(np.abs(np.diag(dev))))
    off = float(np.max(np.abs(dev - np.diag(np.diag(dev)))))
    m = n_check + 1
    audit = {"+": float(np.mean(np.real(np.diag(B)[:m]))),
             "-": float(np.mean(np.real(np.diag(B)[m:])))}
    return IdentityReport(dev, diag, off, audit, grid, n_check)


@dataclass(frozen=True)
class RefinementStudy:
    reports: tuple
    coarse: IdentityReport
    fine: IdentityReport
    ratio: float
    halves: bool

    def to_dict(self):
        return {"panels": [r.grid.radial_panels for r in self.reports],
                "errors": [r.max_error for r in self.reports],
                "coarse_error": self.coarse.max_error, "fine_error": self.fine.max_error,
                "ratio": self.ratio, "halves": self.halves, "audit": self.fine.audit}


def identity_refinement(ladder, spectral, density, n_max=25, n_check=10, r_max=8.0,
                        radial_order=8, start_panels=1, max_panels=64, floor=1e-10):
    """Double the radial panel count until the error drops below ``floor``.

    The last grid whose error is still above ``floor`` is the coarse grid and
    its refinement is the fine grid; every refinement step must at least halve
    the error while it is measurable.
    """
    reports = []
    panels = start_panels
    while panels <= max_panels:
        g = IdentityGrid(r_max, panels, radial_order)
        reports.append(resolution_of_identity_check(ladder, spectral, density, n_max, n_check, g))
        if reports[-1].max_error <= floor:
            break
        panels *= 2
    if len(reports) < 2 or reports[0].max_error <= floor:
        raise ConvergenceError("no grid with a measurable error was found")
    errs = [r.max_error for r in reports]
    halves = all(b <= 0.5 * a for a, b in zip(errs[:-1], errs[1:]))
    coarse, fine = reports[-2], reports[-1]
    return RefinementStudy(tuple(reports), coarse, fine, fine.max_error / coarse.max_error, halves)
