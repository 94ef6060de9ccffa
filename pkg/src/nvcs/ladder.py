"""Ladder operators on the reorganized towers.

A :class:`LadderSpec` bundles the structure-function magnitudes K0_pm(n)
and the auxiliary functions h_pm(n) for both towers.  Temporal phases are
not stored; they are supplied per call through ``tau`` and the spectrum,
K(n) = K0(n) exp(i omega0 tau (e_n - e_{n-1})).

Matrices over the tower basis use the ordering (plus 0..N, minus 0..N).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .deformed_algebra import Canonical, MultiParam, basic_numbers, f_values
from .errors import BasisMismatchError, DomainError, SingularityError

BRANCHES = ("+", "-")


def _branch(b):
    if b in ("+", 1, "plus"):
        return "+"
    if b in ("-", -1, "minus"):
        return "-"
    raise DomainError(f"unknown branch {b!r}")


@dataclass(frozen=True, eq=False)
class LadderSpec:
    """Structure functions of one ladder class.

    ``K0`` and ``h`` map a branch to a vectorized function of the level n.
    K0(0) must vanish and h(n) must be nonzero.
    """

    K0_plus: Callable
    K0_minus: Callable
    h_plus: Callable
    h_minus: Callable
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def K0(self, branch, n):
        fn = self.K0_plus if _branch(branch) == "+" else self.K0_minus
        return np.asarray(fn(np.asarray(n)), dtype=float)

    def h(self, branch, n):
        fn = self.h_plus if _branch(branch) == "+" else self.h_minus
        return np.asarray(fn(np.asarray(n)), dtype=float)

    def log_K0_factorials(self, branch, n_max):
        """log(K0(1) ... K0(n)) for n = 0..n_max."""
        out = np.zeros(n_max + 1)
        if n_max >= 1:
            k = self.K0(branch, np.arange(1, n_max + 1))
            if np.any(k <= 0):
                raise SingularityError(f"K0 vanishes at a level n >= 1 ({self.name})")
            out[1:] = np.cumsum(np.log(k))
        return out

    def log_h_products(self, branch, n_max):
        """(log|P_n|, sign P_n) with P_n = h(n-1)! h(0) = prod_{j<n} h(j)."""
        logs = np.zeros(n_max + 1)
        signs = np.ones(n_max + 1)
        if n_max >= 1:
            h = self.h(branch, np.arange(n_max))
            if np.any(h == 0):
                raise SingularityError("h vanishes")
            logs[1:] = np.cumsum(np.log(np.abs(h)))
            signs[1:] = np.cumprod(np.sign(h))
        return logs, signs

    def dual(self):
        """Ladder of the dual family: K0' = n/K0, h' = 1/h."""
        K0p, K0m, hp, hm = self.K0_plus, self.K0_minus, self.h_plus, self.h_minus

        def swap(fn):
            def g(n):
                n = np.asarray(n)
                k = np.asarray(fn(n), dtype=float)
                with np.errstate(divide="ignore", invalid="ignore"):
                    return np.where(n == 0, 0.0, n / np.where(k == 0, 1.0, k))
            return g

        def inv(fn):
            return lambda n: 1.0 / np.asarray(fn(n), dtype=float)

        return LadderSpec(swap(K0p), swap(K0m), inv(hp), inv(hm), self.name + "-dual", dict(self.meta))


def _table_fn(values_fn):
    """Wrap a function that needs the whole table up to max(n)."""
    def fn(n):
        n = np.asarray(n)
        if n.size == 0:
            return np.zeros(n.shape)
        table = values_fn(int(np.max(n)))
        return table[n]
    return fn


def K_simple(deformation):
    """K0(n) = sqrt({n}) with h(n) = f(n+1) on both towers."""
    basic_numbers(deformation, 2)  # validates the spec early
    if basic_numbers(deformation, 1)[0] != 0:
        raise SingularityError("{0} != 0; the ladder would not annihilate the ground state")
    K0 = _table_fn(lambda m: np.sqrt(basic_numbers(deformation, max(m, 1))))
    h = _table_fn(lambda m: f_values(deformation, m + 1)[1:])
    return LadderSpec(K0, K0, h, h, "simple", {"deformation": deformation.to_dict()})


def K_action_identity(detuning, deformation=None, kappa=1.0):
    """K0(n) = sqrt((1+detuning) n), h = 1; only for the canonical model."""
    if deformation is not None and not isinstance(deformation, Canonical):
        raise DomainError("action-identity class requires the canonical deformation")
    if kappa != 1.0:
        raise DomainError("action-identity class requires kappa = 1")
    if not 1 + detuning > 0:
        raise DomainError("action-identity class needs 1 + detuning > 0")

    def K0(n):
        return np.sqrt((1.0 + detuning) * np.asarray(n, dtype=float))

    def one(n):
        return np.ones(np.shape(n))

    return LadderSpec(K0, K0, one, one, "action-identity", {"detuning": detuning})


def K_pq(spec, mu, nu, l_plus=1.0, l_minus=None):
    """K0(n) = sqrt([n]_0) with h(n) = (q^mu/p^nu)^n sqrt(l)."""
    if not isinstance(spec, MultiParam):
        raise DomainError("K_pq needs a MultiParam deformation")
    if not spec.ground_cancels() or spec.beta != spec.k0:
        raise DomainError("K_pq needs beta = k0 so that [0]_0 = 0")
    l_minus = l_plus if l_minus is None else l_minus
    if l_plus <= 0 or l_minus <= 0:
        raise DomainError("l must be positive")
    K0 = _table_fn(lambda m: np.sqrt(basic_numbers(spec, max(m, 1))))
    c = spec.q ** mu / spec.p ** nu

    def h_of(l):
        return lambda n: c ** np.asarray(n, dtype=float) * math.sqrt(l)

    return LadderSpec(K0, K0, h_of(l_plus), h_of(l_minus), "pq",
                      {"mu": mu, "nu": nu, "l_plus": l_plus, "l_minus": l_minus,
                       "deformation": spec.to_dict()})


def pq_recurrence_residuals(spec, n_max):
    """Relative residuals of the two weighted recurrences satisfied by K0^2 = [n]_0.

    (q^xi/p^rho) K0(n+1)^2 - q^ell K0(n)^2 = p^((rho-alpha) n - beta) phi1 / q^(xi n)
    (q^xi/p^rho) K0(n+1)^2 - p^-ell K0(n)^2 = p^(rho n) phi2 / q^((xi-alpha) n - beta)
    """
    p, q = spec.p, spec.q
    b = basic_numbers(spec, n_max + 1)
    n = np.arange(n_max + 1)
    lhs_common = (q ** spec.xi / p ** spec.rho) * b[n + 1]
    r1 = p ** ((spec.rho - spec.alpha) * n - spec.beta) * spec.phi1_value / q ** (spec.xi * n)
    r2 = p ** (spec.rho * n) * spec.phi2_value / q ** ((spec.xi - spec.alpha) * n - spec.beta)
    e1 = np.abs(lhs_common - q ** spec.ell * b[n] - r1) / np.abs(r1)
    e2 = np.abs(lhs_common - p ** (-spec.ell) * b[n] - r2) / np.abs(r2)
    return e1, e2


# ---------------------------------------------------------------------------
# truncated operators

@dataclass(frozen=True)
class TruncatedOperator:
    matrix: np.ndarray
    basis: str
    N: int

    def _check(self, other):
        if self.basis != other.basis or self.N != other.N:
            raise BasisMismatchError(f"{self.basis}/{self.N} vs {other.basis}/{other.N}")

    def __matmul__(self, other):
        self._check(other)
        return TruncatedOperator(self.matrix @ other.matrix, self.basis, self.N)

    def __add__(self, other):
        self._check(other)
        return TruncatedOperator(self.matrix + other.matrix, self.basis, self.N)

    def __sub__(self, other):
        self._check(other)
        return TruncatedOperator(self.matrix - other.matrix, self.basis, self.N)

    def scale(self, c):
        return TruncatedOperator(c * self.matrix, self.basis, self.N)

    @property
    def H(self):
        return TruncatedOperator(self.matrix.conj().T, self.basis, self.N)

    def commutator(self, other):
        return self @ other - other @ self


def commutator(a, b):
    return a.commutator(b)


def tower_interior(N, margin=2):
    """Tower-basis indices with n <= N - margin in each tower."""
    n = np.arange(N - margin + 1)
    return np.concatenate([n, N + 1 + n])


def complex_K(ladder, branch, N, spectral=None, tau=0.0, omega0=1.0):
    """K(n) for n = 0..N, with temporal phase exp(i omega0 tau (e_n - e_{n-1}))."""
    n = np.arange(N + 1)
    K = ladder.K0(branch, n).astype(complex)
    if tau != 0.0:
        if spectral is None:
            raise DomainError("temporal phases need the spectrum")
        e = spectral.tower(branch)[: N + 1]
        K[1:] *= np.exp(1j * omega0 * tau * np.diff(e))
    return K


def _taus(tau):
    if np.ndim(tau) == 0:
        return float(tau), float(tau)
    return float(tau[0]), float(tau[1])


def annihilation_matrix(ladder, N, spectral=None, basis="tower", tau=0.0, omega0=None):
    """Truncated annihilation operator M^- (tower basis or Fock basis)."""
    omega0 = spectral.params.omega0 if (omega0 is None and spectral is not None) else (omega0 or 1.0)
    tp, tm = _taus(tau)
    if basis == "tower":
        dim = 2 * (N + 1)
        M = np.zeros((dim, dim), dtype=complex)
        n = np.arange(1, N + 1)
        for off, br, t in ((0, "+", tp), (N + 1, "-", tm)):
            K = complex_K(ladder, br, N, spectral, t, omega0)
            M[off + n - 1, off + n] = K[1:]
        return TruncatedOperator(M, "tower", N)
    if basis == "fock":
        if spectral is None:
            raise DomainError("Fock-basis assembly needs the spectrum")
        return TruncatedOperator(_fock_assembly(ladder, N, spectral, tp, tm, omega0), "fock", N)
    raise BasisMismatchError(f"unknown basis {basis!r}")


def creation_matrix(ladder, N, spectral=None, basis="tower", tau=0.0, omega0=None):
    return annihilation_matrix(ladder, N, spectral, basis, tau, omega0).H


def _fock_assembly(ladder, N, spectral, tp, tm, omega0):
    """Entrywise Fock-basis matrix of M^- built from the mixing angles.

    Plus labels n and n+1 sit on pairs p = n + n0 and p + 1; the minus labels
    on the same pairs are n + k and n + k + 1, so the minus-tower factor is
    K_-(n+1+k).  The bridge K_-(k) links the last finite state to the first
    minus-tower pair.  Only complete pairs (p + k eps <= N) are assembled.
    """
    params = spectral.params
    k, eps = params.k, params.epsilon
    if spectral.n_max < N + k + 1:
        raise DomainError("spectrum must cover N + k + 1 levels")
    Kp = complex_K(ladder, "+", N + k + 1, spectral, tp, omega0)
    Km = complex_K(ladder, "-", N + k + 1, spectral, tm, omega0)
    s, c = spectral.sin, spectral.cos
    dim = 2 * (N + 1)
    M = np.zeros((dim, dim), dtype=complex)

    def fi(m, spin):
        return m if spin > 0 else N + 1 + m

    def inside(*ms):
        return all(0 <= m <= N for m in ms)

    # finite states |q,-eps> lowered within the finite block
    for q in range(1, k):
        M[fi(q - 1, -eps), fi(q, -eps)] += Km[q]
    # bridge from the first minus-tower pair onto |k-1,-eps>
    p0 = int(spectral.pair_index[0])
    if inside(p0, p0 + k * eps):
        M[fi(k - 1, -eps), fi(p0, +1)] += Km[k] * c[0]
        M[fi(k - 1, -eps), fi(p0 + k * eps, -1)] += -Km[k] * s[0]
    # tower terms between consecutive pairs
    for n in range(N + 1):
        p = int(spectral.pair_index[n])
        if not inside(p, p + 1, p + k * eps, p + 1 + k * eps):
            continue
        kp, km = Kp[n + 1], Km[n + 1 + k]
        s0, c0, s1, c1 = s[n], c[n], s[n + 1], c[n + 1]
        a, b = fi(p, +1), fi(p + k * eps, -1)
        a1, b1 = fi(p + 1, +1), fi(p + 1 + k * eps, -1)
        M[a, a1] += s0 * np.conj(s1) * kp + c0 * c1 * km
        M[a, b1] += s0 * c1 * kp - c0 * s1 * km
        M[b, a1] += c0 * np.conj(s1) * kp - np.conj(s0) * c1 * km
        M[b, b1] += c0 * c1 * kp + np.conj(s0) * s1 * km
    return M


def q_matrix(ladder, N, inverse=False):
    """Diagonal Q = sum |e_n> h(n) <e_n| on the tower basis."""
    n = np.arange(N + 1)
    d = np.concatenate([ladder.h("+", n), ladder.h("-", n)]).astype(complex)
    if inverse:
        d = 1.0 / d
    return TruncatedOperator(np.diag(d), "tower", N)


def G_values(ladder, branch, N, spectral=None, tau=0.0, omega0=1.0):
    """conj G(n) = n / K(n) for n >= 1 and 0 at n = 0."""
    K = complex_K(ladder, branch, N, spectral, tau, omega0)
    if np.any(K[1:] == 0):
        raise SingularityError("K vanishes at some n >= 1; G is undefined")
    G = np.zeros(N + 1, dtype=complex)
    G[1:] = np.arange(1, N + 1) / K[1:]
    return G


def B_plus_matrix(ladder, N, spectral=None, tau=0.0, omega0=None):
    """B^+ = sum |e_{n+1}> conj G(n+1) <e_n| with conj G(p) = p / K(p)."""
    omega0 = spectral.params.omega0 if (omega0 is None and spectral is not None) else (omega0 or 1.0)
    tp, tm = _taus(tau)
    dim = 2 * (N + 1)
    B = np.zeros((dim, dim), dtype=complex)
    n = np.arange(N)
    for off, br, t in ((0, "+", tp), (N + 1, "-", tm)):
        G = G_values(ladder, br, N, spectral, t, omega0)
        B[off + n + 1, off + n] = G[1:]
    return TruncatedOperator(B, "tower", N)
