"""Deformation functions, basic numbers and (p,q) special functions.

A deformation is described by a small frozen object exposing vectorized
``basic(n)`` evaluation of the basic numbers {n} = n f(n)^2.  Everything
else (f itself, factorials, ratios) is derived from that in this module.
Factorials are accumulated as sums of logarithms so that several hundred
levels can be handled without overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    DivergenceError,
    DomainError,
    SingularityError,
    ZeroFactorialError,
)

# products are stopped once the factor is this close to its limit
PRODUCT_RTOL = 1e-16
PRODUCT_CAP = 100_000
SERIES_CAP = 20_000


def _as_index(n):
    arr = np.asarray(n)
    if arr.dtype.kind not in "iu":
        if not np.all(arr == np.floor(arr)):
            raise DomainError("level index must be an integer")
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise DomainError("level index must be nonnegative")
    return arr


@dataclass(frozen=True)
class Canonical:
    """Undeformed oscillator, f = 1 and {n} = n."""

    kind = "canonical"

    def basic(self, n):
        return _as_index(n).astype(float)

    def f_zero(self):
        return 1.0

    def to_dict(self):
        return {"type": self.kind}


@dataclass(frozen=True)
class Burban:
    """(p,q;alpha,beta,ell) deformation.

    {n} = (p^(-alpha n - beta) - q^(alpha n + beta)) / (p^-ell - q^ell)
    """

    p: float
    q: float
    alpha: float = 1.0
    beta: float = 0.0
    ell: float = 1.0
    kind = "burban"

    def __post_init__(self):
        if not self.p > 1:
            raise DomainError(f"Burban needs p > 1, got {self.p}")
        if not 0 < self.q < 1:
            raise DomainError(f"Burban needs 0 < q < 1, got {self.q}")
        if self.alpha < 0:
            raise DomainError("Burban needs alpha >= 0")
        if not (self.p * self.q) ** self.alpha < 1:
            raise DomainError("Burban needs (p q)^alpha < 1")

    @property
    def denominator(self):
        # p^-ell - q^ell = -p^-ell expm1(ell log(pq)), stable as p, q -> 1
        return -self.p ** (-self.ell) * math.expm1(self.ell * (math.log(self.p) + math.log(self.q)))

    def basic(self, n):
        x = self.alpha * _as_index(n) + self.beta
        den = self.denominator
        if den == 0:
            raise SingularityError("p^-ell - q^ell vanishes (ell = 0)")
        # -expm1 keeps accuracy when p, q are close to one
        lp, lq = math.log(self.p), math.log(self.q)
        num = np.exp(-x * lp) * -np.expm1(x * (lq + lp))
        return num / den

    def f_zero(self):
        if self.beta != 0:
            raise SingularityError("{0} != 0 when beta != 0; f(0) has no limit")
        return math.sqrt(self.alpha * math.log(1.0 / (self.p * self.q)) / self.denominator)

    def to_dict(self):
        return {"type": self.kind, "p": self.p, "q": self.q, "alpha": self.alpha,
                "beta": self.beta, "ell": self.ell}


def _const(value):
    def fn(p, q):
        return value
    return fn


@dataclass(frozen=True)
class MultiParam:
    """(p,q;alpha,beta,ell;rho,xi;phi1,phi2) deformation with integer k0.

    The basic number is
    [n]_0 = (p^rho/q^xi)^n (p^(-alpha n-beta) phi1 - q^(alpha n+beta) phi2) / (p^-ell - q^ell).
    ``phi1`` and ``phi2`` are callables of (p, q).
    """

    p: float
    q: float
    alpha: float
    beta: float
    ell: float
    rho: float
    xi: float
    phi1: Callable[[float, float], float]
    phi2: Callable[[float, float], float]
    k0: int = 0
    kind = "multiparam"

    def __post_init__(self):
        if not self.p > 1 or not 0 < self.q < 1:
            raise DomainError("MultiParam needs p > 1 and 0 < q < 1")
        if self.alpha < 0 or not (self.p * self.q) ** self.alpha < 1:
            raise DomainError("MultiParam needs alpha >= 0 and (p q)^alpha < 1")
        if int(self.k0) != self.k0 or self.k0 < 0:
            raise DomainError("k0 must be a nonnegative integer")
        f1, f2 = self.phi1_value, self.phi2_value
        if not 0 < f1 <= f2:
            raise DomainError("MultiParam needs 0 < phi1 <= phi2")
        ratio = (self.p * self.q) ** self.k0
        if abs(f1 / f2 - ratio) > 1e-12 * ratio:
            raise DomainError("MultiParam needs phi1/phi2 = (p q)^k0")

    @classmethod
    def with_k0(cls, p, q, alpha, ell, rho, xi, k0, phi1=1.0, beta=None):
        """Build the spec with phi2 = phi1 (pq)^-k0 and, by default, beta = k0."""
        c1 = float(phi1)
        c2 = c1 * (p * q) ** (-k0)
        return cls(p, q, alpha, float(k0 if beta is None else beta), ell, rho, xi,
                   _const(c1), _const(c2), int(k0))

    @property
    def phi1_value(self):
        return float(self.phi1(self.p, self.q))

    @property
    def phi2_value(self):
        return float(self.phi2(self.p, self.q))

    @property
    def denominator(self):
        # p^-ell - q^ell = -p^-ell expm1(ell log(pq)), stable as p, q -> 1
        return -self.p ** (-self.ell) * math.expm1(self.ell * (math.log(self.p) + math.log(self.q)))

    def basic(self, n):
        n = _as_index(n)
        x = self.alpha * n + self.beta
        den = self.denominator
        if den == 0:
            raise SingularityError("p^-ell - q^ell vanishes (ell = 0)")
        pref = (self.p ** self.rho / self.q ** self.xi) ** n
        return pref * (self.p ** (-x) * self.phi1_value - self.q ** x * self.phi2_value) / den

    def ground_cancels(self):
        a = self.p ** (-self.beta) * self.phi1_value
        b = self.q ** self.beta * self.phi2_value
        return abs(a - b) <= 1e-13 * max(abs(a), abs(b))

    def f_zero(self):
        if not self.ground_cancels():
            raise SingularityError("[0]_0 != 0 (beta != k0); f(0) has no limit")
        c = self.q ** self.beta * self.phi2_value
        return math.sqrt(self.alpha * c * math.log(1.0 / (self.p * self.q)) / self.denominator)

    def to_dict(self):
        return {"type": self.kind, "p": self.p, "q": self.q, "alpha": self.alpha,
                "beta": self.beta, "ell": self.ell, "rho": self.rho, "xi": self.xi,
                "phi1": self.phi1_value, "phi2": self.phi2_value, "k0": int(self.k0)}


@dataclass(frozen=True)
class CustomTable:
    """Deformation given by a finite table f(0), f(1), ..., f(N)."""

    f_values: Sequence[float] = field(default_factory=tuple)
    kind = "custom"

    def __post_init__(self):
        vals = np.asarray(self.f_values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise DomainError("custom table must be a nonempty sequence")
        if np.any(vals == 0):
            raise DomainError("custom table entries must be nonzero")
        object.__setattr__(self, "f_values", tuple(float(v) for v in vals))

    def _lookup(self, n):
        n = _as_index(n)
        if np.any(n >= len(self.f_values)):
            raise DomainError(
                f"custom table has {len(self.f_values)} entries; level {int(np.max(n))} requested")
        return np.asarray(self.f_values)[n]

    def basic(self, n):
        n = _as_index(n)
        return n * self._lookup(n) ** 2

    def f_zero(self):
        return abs(self.f_values[0])

    def to_dict(self):
        return {"type": self.kind, "f_values": list(self.f_values)}


DeformationSpec = Canonical | Burban | MultiParam | CustomTable


def deformation_from_dict(d):
    """Inverse of ``spec.to_dict()``."""
    kind = d.get("type")
    if kind == "canonical":
        return Canonical()
    if kind == "burban":
        return Burban(float(d["p"]), float(d["q"]), float(d.get("alpha", 1.0)),
                      float(d.get("beta", 0.0)), float(d.get("ell", 1.0)))
    if kind == "multiparam":
        return MultiParam(float(d["p"]), float(d["q"]), float(d["alpha"]), float(d["beta"]),
                          float(d["ell"]), float(d["rho"]), float(d["xi"]),
                          _const(float(d["phi1"])), _const(float(d["phi2"])), int(d["k0"]))
    if kind == "custom":
        return CustomTable(tuple(d["f_values"]))
    raise DomainError(f"unknown deformation type {kind!r}")


# ---------------------------------------------------------------------------
# basic numbers and factorials

def basic_numbers(spec, n_max):
    """Array of {0}, ..., {n_max}; {0} is its n -> 0 limit."""
    n = np.arange(n_max + 1)
    vals = np.array(spec.basic(n), dtype=float)
    if isinstance(spec, (Burban, MultiParam)):
        # analytic limit of n f^2(n) at n = 0 vanishes when the numerator does
        if isinstance(spec, Burban) and spec.beta == 0:
            vals[0] = 0.0
        elif isinstance(spec, MultiParam) and spec.ground_cancels():
            vals[0] = 0.0
    if n_max >= 1 and np.any(vals[1:] <= 0):
        bad = int(np.argmax(vals[1:] <= 0)) + 1
        raise SingularityError(f"basic number {{{bad}}} = {vals[bad]!r} is not positive")
    return vals


def basic_number(spec, n):
    """{n} = n f(n)^2 (or [n]_0 for the multiparameter family)."""
    n = int(_as_index(n))
    return float(basic_numbers(spec, n)[n])


def f_value(spec, n):
    """Deformation function f(n); f(0) is the analytic limit."""
    n = int(_as_index(n))
    if isinstance(spec, Canonical):
        return 1.0
    if isinstance(spec, CustomTable):
        return float(abs(spec._lookup(n)))
    if n == 0:
        return float(spec.f_zero())
    b = basic_number(spec, n)
    return math.sqrt(b / n)


def f_values(spec, n_max):
    """Vector of f(0), ..., f(n_max)."""
    if isinstance(spec, CustomTable):
        return np.abs(spec._lookup(np.arange(n_max + 1)))
    b = basic_numbers(spec, n_max)
    out = np.empty(n_max + 1)
    out[0] = f_value(spec, 0)
    n = np.arange(1, n_max + 1)
    out[1:] = np.sqrt(b[1:] / n)
    return out


def log_basic_factorials(spec, n_max):
    """log({n}!) for n = 0..n_max, accumulated in the log domain.

    Raises ZeroFactorialError if some {m} with 1 <= m <= n_max vanishes.
    """
    b = basic_numbers(spec, n_max)
    if n_max >= 1 and np.any(b[1:] == 0):
        raise ZeroFactorialError("zero-factorial: a basic number vanished")
    out = np.zeros(n_max + 1)
    if n_max >= 1:
        out[1:] = np.cumsum(np.log(b[1:]))
    return out


def log_basic_factorial(spec, n):
    n = int(_as_index(n))
    return float(log_basic_factorials(spec, n)[n])


def basic_factorial(spec, n):
    """{n}! with {0}! = 1."""
    return math.exp(log_basic_factorial(spec, n))


# ---------------------------------------------------------------------------
# (p,q) special functions

def _check_pq(p, q):
    if not p > 1 or not 0 < q < 1:
        raise DomainError("need p > 1 and 0 < q < 1")
    if p * q >= 1:
        raise DivergenceError("pq >= 1: the shifted products do not converge")


def pq_shifted_factorial(a, b, p, q, alpha):
    """[a,b;p,q]_alpha for integer alpha >= 0.

    The defining ratio of two infinite products telescopes to the finite
    product prod_{m<alpha} (1/(a p^m) - b q^m).
    """
    _check_pq(p, q)
    if a == 0:
        raise DomainError("a must be nonzero")
    if int(alpha) != alpha or alpha < 0:
        raise DomainError("alpha must be a nonnegative integer")
    m = np.arange(int(alpha))
    return float(np.prod(1.0 / (a * p ** m) - b * q ** m))


def log_pq_factorials(p, q, n_max):
    """log [p,q;p,q]_n for n = 0..n_max.

    Each factor p^-j - q^j is written as p^-j (1 - (pq)^j).
    """
    _check_pq(p, q)
    j = np.arange(1, n_max + 1)
    terms = -j * math.log(p) + np.log1p(-(p * q) ** j)
    out = np.zeros(n_max + 1)
    out[1:] = np.cumsum(terms)
    return out


def pq_factorial(p, q, n):
    """[p,q;p,q]_n = prod_{j=1}^n (p^-j - q^j)."""
    return math.exp(log_pq_factorials(p, q, int(n))[int(n)])


@dataclass(frozen=True)
class PQParams:
    p: float
    q: float
    mu: float
    nu: float

    def __post_init__(self):
        _check_pq(self.p, self.q)
        if self.growth > 1 + 1e-14:
            raise DomainError("generalized exponential needs q^(2 mu) p^(1 - 2 nu) <= 1")

    @property
    def growth(self):
        return self.q ** (2 * self.mu) * self.p ** (1 - 2 * self.nu)

    @property
    def radius(self):
        """Radius of convergence; infinite unless the growth factor equals one."""
        if self.growth < 1 - 1e-14:
            return math.inf
        return 1.0 / (self.q ** self.mu * self.p ** (1 - self.nu))


def generalized_exponential(params, z):
    """E^(mu,nu)_(p,q)(z) = sum (q^mu/p^nu)^(n^2) z^n / [p,q;p,q]_n."""
    z = complex(z)
    if z == 0:
        return 1.0 + 0j
    if abs(z) >= params.radius:
        raise DomainError(f"|z| = {abs(z)} outside the convergence disc {params.radius}")
    p, q = params.p, params.q
    c = params.mu * math.log(q) - params.nu * math.log(p)
    lz = math.log(abs(z))
    total = 0j
    log_fact = 0.0
    prev = math.inf
    for n in range(SERIES_CAP):
        if n:
            log_fact += -n * math.log(p) + math.log1p(-(p * q) ** n)
        log_mag = c * n * n + n * lz - log_fact
        term = math.exp(log_mag) * np.exp(1j * n * np.angle(z)) if log_mag > -745 else 0j
        total += term
        mag = abs(term)
        if n > 2 and mag <= prev and mag < 1e-16 * max(abs(total), 1e-300):
            return complex(total)
        prev = mag
    raise ConvergenceError("generalized exponential hit its term cap")


def pq_exponential(p, q, z):
    """e_(p,q)(z) = sum p^(-n^2/2) z^n / [p,q;p,q]_n for |z| < p^-1/2."""
    if abs(z) >= p ** -0.5:
        raise DomainError("pq_exponential series needs |z| < p^-1/2")
    return generalized_exponential(PQParams(p, q, 0.0, 0.5), z)


def pq_exponential_product(p, q, z):
    """Product form 1/prod_{j>=0} (1 - p^(1/2) z (pq)^j) of e_(p,q)(z).

    Agrees with the series inside the disc and continues it to the whole
    plane minus the poles; used on the negative real axis by the moment
    densities.
    """
    _check_pq(p, q)
    x = complex(z) * math.sqrt(p)
    Q = p * q
    log_val = 0j
    j = 0
    while True:
        t = x * Q ** j
        if t == 1:
            raise SingularityError("pole of the (p,q)-exponential")
        log_val -= np.log1p(-t) if abs(t) < 0.5 else np.log(1 - t)
        if abs(t) < PRODUCT_RTOL:
            break
        j += 1
        if j > PRODUCT_CAP:
            raise ConvergenceError("product cap reached")
    val = np.exp(log_val)
    return complex(val)


def log_pq_exponential_neg(p, q, x):
    """log e_(p,q)(-x p^-1/2) = -sum_j log(1 + x (pq)^j) for real x >= 0, vectorized."""
    _check_pq(p, q)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    Q = p * q
    xmax = float(np.max(x)) if x.size else 0.0
    if xmax == 0:
        return np.zeros_like(x)
    n_terms = int(math.ceil(math.log(PRODUCT_RTOL / xmax) / math.log(Q))) + 1
    n_terms = max(n_terms, 1)
    if n_terms > PRODUCT_CAP:
        raise ConvergenceError("product cap reached")
    out = np.zeros_like(x)
    # chunk the factor index to bound memory
    for start in range(0, n_terms, 4096):
        qj = Q ** np.arange(start, min(n_terms, start + 4096))
        out -= np.log1p(np.multiply.outer(x, qj)).sum(axis=-1)
    return out


def ramanujan_moment(p, q, lam0, n):
    """Closed form of int_0^inf t^n e_(p,q)(-lam0 p^-1/2 t) dt.

    [p,q;p,q]_n / (lam0^(n+1) q^(n(n+1)/2)) * log(1/(pq))
    """
    _check_pq(p, q)
    if lam0 <= 0:
        raise DomainError("lam0 must be positive")
    n = int(n)
    log_val = (log_pq_factorials(p, q, n)[n] - (n + 1) * math.log(lam0)
               - 0.5 * n * (n + 1) * math.log(q))
    return math.exp(log_val) * math.log(1.0 / (p * q))
