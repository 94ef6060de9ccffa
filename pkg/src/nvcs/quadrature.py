"""Adaptive Gauss-Legendre quadrature used by the moment and identity checks.

Finite intervals are split into 2^j equal panels and the panel count is
doubled until two successive estimates agree.  Semi-infinite integrals
are covered by geometrically growing panels [0,s], [s,2s], [2s,4s], ...
until a panel contributes nothing at the working precision.  Sums are
accumulated with math.fsum so the result does not depend on grouping.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError


@lru_cache(maxsize=64)
def gauss_legendre(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return x, w


def _panel_sum(f, edges, m):
    x, w = gauss_legendre(m)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    vals = np.asarray(f(pts))
    vals = vals.reshape((len(a), m) + vals.shape[1:])
    weights = (half[:, None] * w[None, :])
    return np.tensordot(weights, vals, axes=([0, 1], [0, 1]))


def integrate(f, a, b, rtol=1e-13, atol=0.0, m=20, max_level=12):
    """Integral of a vectorized f over [a, b] by panel doubling.

    Returns (value, error_estimate).  ``f`` may return arrays of any trailing
    shape; convergence is judged on the max-norm.
    """
    prev = None
    for level in range(max_level + 1):
        edges = np.linspace(a, b, 2 ** level + 1)
        val = _panel_sum(f, edges, m)
        if prev is not None:
            err = float(np.max(np.abs(val - prev)))
            scale = float(np.max(np.abs(val)))
            if err <= max(rtol * scale, atol):
                return val, err
        prev = val
    raise ConvergenceError(f"quadrature on [{a}, {b}] did not converge")


def integrate_semi_infinite(f, scale=1.0, rtol=1e-13, m=20, max_panels=200):
    """Integral of f over [0, inf) with geometric panels.

    Panels stop once one contributes less than rtol * 1e-3 of the running
    total; that contribution bounds the neglected tail for integrands that
    decay at least geometrically over a panel.
    """
    edges = [0.0, float(scale)]
    total = None
    err_total = 0.0
    tail = math.inf
    for _ in range(max_panels):
        a, b = edges[-2], edges[-1]
        val, err = integrate(f, a, b, rtol=rtol * 0.1, m=m)
        total = val if total is None else total + val
        err_total += err
        size = float(np.max(np.abs(total)))
        tail = float(np.max(np.abs(val)))
        if size > 0 and tail <= 1e-3 * rtol * size and b > scale:
            return total, err_total + tail
        edges.append(2 * b)
    raise ConvergenceError("semi-infinite quadrature did not settle")


def periodic_nodes(M):
    """Trapezoid nodes and weights on [0, 2 pi)."""
    t = 2 * np.pi * np.arange(M) / M
    return t, np.full(M, 2 * np.pi / M)


def interval_nodes(a, b, m):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = gauss_legendre(m)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def composite_nodes(a, b, m, panels):
    edges = np.linspace(a, b, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = interval_nodes(lo, hi, m)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)
