"""Spectrum of the reduced spin-orbit Hamiltonian and its truncated-matrix oracle.

Conventions
-----------
The Hamiltonian couples the Fock states |n,+> and |n+k eps,->.  On that
pair it acts as the 2x2 block

    [[d_plus(n), c(n)], [conj c(n), d_minus(n + k eps)]]

with d_plus(n) = (1+detuning)/2 ({n+1}+{n}) + ({n+1} - kappa {n})/2,
d_minus(m) = (1+detuning)/2 ({m+1}+{m}) - ({m+1} - kappa {m})/2 and
c(n) = lambda(n+k) sqrt({n+k}!/{n}!) for eps=+1,
c(n) = conj(lambda(n-k)) sqrt({n}!/{n-k}!) for eps=-1.

Truncated matrices use the block ordering index(m,+) = m,
index(m,-) = N+1+m for Fock states, and the same ordering over tower
labels (plus tower first, then minus tower).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .deformed_algebra import Canonical, basic_numbers, deformation_from_dict
from .errors import DegenerateLevelError, DomainError

DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class Coupling:
    """lambda(n) = amplitude (n+1)^power exp(i (phase + phase_slope n))."""

    amplitude: float = 0.3
    phase: float = 0.0
    phase_slope: float = 0.0
    power: float = 0.0

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        return self.amplitude * (n + 1.0) ** self.power * np.exp(1j * (self.phase + self.phase_slope * n))

    def to_dict(self):
        return {"amplitude": self.amplitude, "phase": self.phase,
                "phase_slope": self.phase_slope, "power": self.power}


@dataclass(frozen=True)
class ModelParams:
    k: int = 1
    epsilon: int = 1
    kappa: float = 1.0
    detuning: float = 0.0
    omega0: float = 1.0
    coupling: Callable = field(default_factory=Coupling)
    deformation: object = field(default_factory=Canonical)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError("k must be an integer >= 1")
        if self.epsilon not in (1, -1):
            raise DomainError("epsilon must be +1 or -1")
        if not self.omega0 > 0:
            raise DomainError("omega0 must be positive")

    @property
    def n0(self):
        """Index offset n_0^eps = max(0, -k eps)."""
        return max(0, -self.k * self.epsilon)

    @property
    def n0_opposite(self):
        return max(0, self.k * self.epsilon)

    def phase_lambda(self, n):
        return np.angle(self.coupling(n))

    def to_dict(self):
        coupling = self.coupling.to_dict() if hasattr(self.coupling, "to_dict") else repr(self.coupling)
        return {"k": int(self.k), "epsilon": int(self.epsilon), "kappa": self.kappa,
                "detuning": self.detuning, "omega0": self.omega0,
                "coupling": coupling, "deformation": self.deformation.to_dict()}

    @classmethod
    def from_dict(cls, d):
        c = d.get("coupling", {})
        if not isinstance(c, dict):
            raise DomainError("coupling must be a mapping")
        return cls(int(d.get("k", 1)), int(d.get("epsilon", 1)), float(d.get("kappa", 1.0)),
                   float(d.get("detuning", 0.0)), float(d.get("omega0", 1.0)),
                   Coupling(**{key: float(v) for key, v in c.items()}),
                   deformation_from_dict(d.get("deformation", {"type": "canonical"})))

    def canonical(self):
        """Same model with f -> 1 and kappa -> 1."""
        return ModelParams(self.k, self.epsilon, 1.0, self.detuning, self.omega0,
                           self.coupling, Canonical())


# ---------------------------------------------------------------------------
# diagonal pieces and couplings on the Fock basis

def _basic(params, m_max):
    return basic_numbers(params.deformation, max(int(m_max), 1))


def d_plus(params, m, b=None):
    m = np.asarray(m)
    b = _basic(params, np.max(m) + 1) if b is None else b
    return 0.5 * (1 + params.detuning) * (b[m + 1] + b[m]) + 0.5 * (b[m + 1] - params.kappa * b[m])


def d_minus(params, m, b=None):
    m = np.asarray(m)
    b = _basic(params, np.max(m) + 1) if b is None else b
    return 0.5 * (1 + params.detuning) * (b[m + 1] + b[m]) - 0.5 * (b[m + 1] - params.kappa * b[m])


def _check_pair(params, n):
    n = np.asarray(n)
    if np.any(n < 0) or np.any(n + params.k * params.epsilon < 0):
        raise DomainError("pair index needs n >= 0 and n + k eps >= 0")
    return n


def factorial_ratio(params, n, b=None):
    """({n+k eps}!/{n}!)^eps as a product of exactly k basic numbers."""
    n = _check_pair(params, n)
    k = params.k
    b = _basic(params, np.max(n) + k + 1) if b is None else b
    if params.epsilon == 1:
        idx = n[..., None] + np.arange(1, k + 1)
    else:
        idx = n[..., None] - np.arange(k)
    return np.prod(b[idx], axis=-1)


def coupling_element(params, n, b=None):
    """c(n) = <n,+|H|n+k eps,->."""
    n = _check_pair(params, n)
    ratio = factorial_ratio(params, n, b)
    if params.epsilon == 1:
        lam = params.coupling(n + params.k)
    else:
        lam = np.conj(params.coupling(n - params.k))
    return lam * np.sqrt(ratio)


def curly_E(params, n):
    """Half the diagonal difference of the 2x2 block of pair n."""
    n = _check_pair(params, n)
    b = _basic(params, np.max(n) + params.k + 2)
    m = n + params.k * params.epsilon
    return 0.5 * (d_minus(params, m, b) - d_plus(params, n, b))


def Q_of_n(params, n):
    """Q({n}) = sqrt(E^2 + |lambda(n+k eps)|^2 ({n+k eps}!/{n}!)^eps)."""
    n = _check_pair(params, n)
    b = _basic(params, np.max(n) + params.k + 2)
    lam2 = np.abs(params.coupling(n + params.k * params.epsilon)) ** 2
    e = curly_E(params, n)
    return np.sqrt(e ** 2 + lam2 * factorial_ratio(params, n, b))


def eigenvalues(params, n):
    """(E_n^+, E_n^-) of pair n."""
    n = _check_pair(params, n)
    b = _basic(params, np.max(n) + params.k + 2)
    m = n + params.k * params.epsilon
    mean = 0.5 * (d_plus(params, n, b) + d_minus(params, m, b))
    q = Q_of_n(params, n)
    return mean + q, mean - q


def finite_energies(params, q=None):
    """E*_q, the diagonal energy of the unpaired state |q, -eps>, q < k."""
    if q is None:
        qs = np.arange(params.k)
    else:
        qs = np.asarray(q)
        if np.any(qs < 0) or np.any(qs >= params.k):
            raise DomainError(f"finite state index must lie in [0, {params.k - 1}]")
    b = _basic(params, int(np.max(qs)) + 1 if qs.size else 1)
    if params.epsilon == 1:
        return d_minus(params, qs, b)
    return d_plus(params, qs, b)


def _energy_scale(params, n):
    b = _basic(params, np.max(n) + params.k + 2)
    m = n + params.k * params.epsilon
    return np.maximum(1.0, np.maximum(np.abs(d_plus(params, n, b)), np.abs(d_minus(params, m, b))))


def _angles(params, n):
    n = _check_pair(params, n)
    e = curly_E(params, n)
    q = Q_of_n(params, n)
    c = coupling_element(params, n)
    degenerate = q <= DEGENERATE_RTOL * _energy_scale(params, n)
    qs = np.where(degenerate, 1.0, q)
    cos = np.sqrt(np.clip((qs + e) / (2 * qs), 0.0, 1.0))
    smag = np.sqrt(np.clip((qs - e) / (2 * qs), 0.0, 1.0))
    sin = smag * np.exp(1j * np.angle(c))
    sin = np.where(degenerate, 0.0, sin)
    cos = np.where(degenerate, 1.0, cos)
    return sin, cos, degenerate


def mixing_angles(params, n):
    """(sin theta, cos theta) of pair n; sin carries the phase of the coupling element."""
    sin, cos, degenerate = _angles(params, np.asarray(n))
    if np.any(degenerate):
        raise DegenerateLevelError(f"Q vanishes at pair {n}; mixing angle undefined")
    return sin, cos


def eigenstate_vector(params, n, branch):
    """Components of |E_n^branch> on (|n,+>, |n+k eps,->)."""
    sin, cos = mixing_angles(params, n)
    if branch in ("+", 1, "plus"):
        return np.array([sin, cos], dtype=complex)
    if branch in ("-", -1, "minus"):
        return np.array([cos, -np.conj(sin)], dtype=complex)
    raise DomainError("branch must be '+' or '-'")


# ---------------------------------------------------------------------------
# reorganized towers

@dataclass(frozen=True)
class SpectralData:
    """Closed-form spectrum on the reorganized towers e_n^+, e_n^- (n <= n_max).

    Arrays indexed by plus label n hold the data of pair n + n0.  The minus
    label n >= k belongs to the same pair as plus label n - k.
    """

    params: ModelParams
    n_max: int
    finite: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    pair_index: np.ndarray
    sin: np.ndarray
    cos: np.ndarray
    Q: np.ndarray
    degenerate: np.ndarray

    @property
    def k(self):
        return self.params.k

    @property
    def index_offset(self):
        return self.params.n0

    def tower(self, branch):
        return self.e_plus if branch in ("+", 1, "plus") else self.e_minus

    def plus_to_old(self, n):
        """Old label of e_n^+: ('E+', pair)."""
        return ("E+", int(n) + self.params.n0)

    def minus_to_old(self, n):
        if n < self.k:
            return ("E*", int(n))
        return ("E-", int(n) - self.k + self.params.n0)

    def old_to_new(self, kind, index):
        if kind == "E*":
            return ("-", int(index))
        if kind == "E+":
            return ("+", int(index) - self.params.n0)
        if kind == "E-":
            return ("-", int(index) + self.k - self.params.n0)
        raise DomainError(f"unknown label kind {kind!r}")

    def pair_splitting(self, n):
        """e_n^+ - e_{n+k}^-, i.e. 2 Q of the pair shared by the two labels."""
        return self.e_plus[n] - self.e_minus[n + self.k]

    def to_dict(self):
        return {
            "params": self.params.to_dict(), "n_max": int(self.n_max),
            "finite": self.finite.tolist(), "e_plus": self.e_plus.tolist(),
            "e_minus": self.e_minus.tolist(), "pair_index": self.pair_index.tolist(),
            "sin": [[z.real, z.imag] for z in self.sin], "cos": self.cos.tolist(),
            "Q": self.Q.tolist(), "degenerate": [bool(x) for x in self.degenerate],
        }

    @classmethod
    def from_dict(cls, d, params=None):
        params = ModelParams.from_dict(d["params"]) if params is None else params
        return cls(params, int(d["n_max"]), np.array(d["finite"], dtype=float),
                   np.array(d["e_plus"], dtype=float), np.array(d["e_minus"], dtype=float),
                   np.array(d["pair_index"], dtype=int),
                   np.array([complex(a, b) for a, b in d["sin"]]), np.array(d["cos"], dtype=float),
                   np.array(d["Q"], dtype=float), np.array(d["degenerate"], dtype=bool))


def reorganized_spectrum(params, n_max):
    """Towers e_n^+ = E^+_{n+n0}, e_n^- = E*_n (n<k) or E^-_{n-n0'} (n>=k)."""
    k = params.k
    if n_max < k:
        raise DomainError("n_max must be at least k")
    pairs = np.arange(n_max + 1) + params.n0
    ep, em = eigenvalues(params, pairs)
    sin, cos, degenerate = _angles(params, pairs)
    finite = np.atleast_1d(finite_energies(params))
    e_minus = np.concatenate([finite, em[: n_max + 1 - k]])
    return SpectralData(params, int(n_max), finite, ep, e_minus, pairs, sin, cos,
                        Q_of_n(params, pairs), degenerate)


# ---------------------------------------------------------------------------
# truncated matrices

def fock_index(N, m, spin):
    return m if spin > 0 else N + 1 + m


def build_hamiltonian_matrix(params, n_max):
    """Dense Hamiltonian on span{|m,+>, |m,->: m <= n_max} from its operator definition."""
    N = int(n_max)
    if N < params.k + 2:
        raise DomainError("n_max must be at least k + 2")
    b = _basic(params, N + params.k + 2)
    m = np.arange(N + 1)
    H = np.zeros((2 * (N + 1), 2 * (N + 1)), dtype=complex)
    H[m, m] = d_plus(params, m, b)
    H[N + 1 + m, N + 1 + m] = d_minus(params, m, b)
    k, eps = params.k, params.epsilon
    lo = 0 if eps == 1 else k
    hi = N - k if eps == 1 else N
    n = np.arange(lo, hi + 1)
    if n.size:
        c = coupling_element(params, n, b)
        rows = n
        cols = N + 1 + n + k * eps
        H[rows, cols] = c
        H[cols, rows] = np.conj(c)
    return H


@dataclass(frozen=True)
class Truncation:
    """Passage matrix U (Fock <- tower) and tower energies at Fock cutoff N.

    Plus labels above N - k have no partner inside the cutoff; they are
    mapped to the leftover Fock states and marked as edge labels.
    """

    params: ModelParams
    N: int
    U: np.ndarray
    energies: np.ndarray
    edge: np.ndarray

    def tower_index(self, n, branch):
        return n if branch in ("+", 1) else self.N + 1 + n


def passage_matrix(params, N, spectral=None):
    N = int(N)
    k, eps = params.k, params.epsilon
    if spectral is None or spectral.n_max < N:
        spectral = reorganized_spectrum(params, N)
    b = _basic(params, N + k + 2)
    dim = 2 * (N + 1)
    U = np.zeros((dim, dim), dtype=complex)
    energies = np.zeros(dim)
    edge = np.zeros(dim, dtype=bool)
    for n in range(N + 1):
        col = n
        if n <= N - k:
            pr = int(spectral.pair_index[n])
            s, c = spectral.sin[n], spectral.cos[n]
            U[fock_index(N, pr, +1), col] = s
            U[fock_index(N, pr + k * eps, -1), col] = c
            energies[col] = spectral.e_plus[n]
        else:
            spin = 1 if eps == 1 else -1
            U[fock_index(N, n, spin), col] = 1.0
            energies[col] = d_plus(params, n, b) if spin > 0 else d_minus(params, n, b)
            edge[col] = True
    for n in range(N + 1):
        col = N + 1 + n
        if n < k:
            U[fock_index(N, n, -eps), col] = 1.0
            energies[col] = spectral.finite[n]
        else:
            j = n - k
            pr = int(spectral.pair_index[j])
            s, c = spectral.sin[j], spectral.cos[j]
            U[fock_index(N, pr, +1), col] = c
            U[fock_index(N, pr + k * eps, -1), col] = -np.conj(s)
            energies[col] = spectral.e_minus[n]
    return Truncation(params, N, U, energies, edge)


def predicted_truncated_eigenvalues(params, N):
    """Closed-form multiset of eigenvalues of build_hamiltonian_matrix(params, N)."""
    return np.sort(passage_matrix(params, N).energies)


def block_eigen(H, params, n, N):
    """Eigenvalues (descending) and eigenvectors of the 2x2 block of pair n taken from H."""
    i = fock_index(N, n, +1)
    j = fock_index(N, n + params.k * params.epsilon, -1)
    blk = H[np.ix_([i, j], [i, j])]
    w, v = np.linalg.eigh(blk)
    return w[::-1], v[:, ::-1]


@dataclass(frozen=True)
class OracleComparison:
    """Closed-form towers against a dense diagonalization of the truncated matrix."""

    eigenvalue_error: float
    normalization_error: float
    eigenvector_error: float
    residual_error: float
    n_check: int
    N: int

    def to_dict(self):
        return dict(self.__dict__)


def oracle_comparison(params, N=60, n_check=40, gap_tol=1e-8):
    """Compare tower energies and eigenstates for labels n <= n_check.

    eigenvalue_error: max relative distance from e_n^pm to the nearest matrix eigenvalue.
    eigenvector_error: max 1 - |<u, v>| over closed-form eigenstates u whose
    matrix eigenvalue is isolated by more than ``gap_tol`` (relative).
    residual_error: max ||H u - e u|| / max(1, |e|) over all checked states.
    """
    sp = reorganized_spectrum(params, N)
    H = build_hamiltonian_matrix(params, N)
    w, v = np.linalg.eigh(H)
    trunc = passage_matrix(params, N, sp)
    norm_err = float(np.max(np.abs(np.abs(sp.sin) ** 2 + sp.cos ** 2 - 1)))
    cols = [n for n in range(n_check + 1)] + [N + 1 + n for n in range(n_check + 1)]
    ev_err = vec_err = res_err = 0.0
    for col in cols:
        if trunc.edge[col]:
            continue
        e = trunc.energies[col]
        u = trunc.U[:, col]
        j = int(np.argmin(np.abs(w - e)))
        scale = max(1.0, abs(e))
        ev_err = max(ev_err, abs(w[j] - e) / scale)
        res_err = max(res_err, float(np.linalg.norm(H @ u - e * u)) / scale)
        others = np.delete(w, j)
        if others.size == 0 or np.min(np.abs(others - w[j])) > gap_tol * scale:
            vec_err = max(vec_err, 1.0 - abs(np.vdot(v[:, j], u)))
    return OracleComparison(ev_err, norm_err, vec_err, res_err, n_check, N)
