"""Hermite/Laguerre special functions and Gauss-Hermite quadrature.

Everything here is pure and deterministic. Oscillator eigenfunctions are
evaluated with a normalized recurrence so that no factorials are formed and
values stay finite for a few hundred states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss

PI_QUARTER = math.pi ** -0.25


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a quadrature rule (read-only arrays)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights differ in length")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, values) -> complex | float:
        return np.dot(self.weights, values)


def hermite_phys(n: int, x):
    """Physicists' Hermite polynomial H_n(x) by three-term recurrence.

    Overflows for roughly n*log(2|x|) > 700; use :func:`ho_eigenfunction`
    (which carries the Gaussian inside the recurrence) for large n.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * x
    for m in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * m * h_prev
    return h if h.ndim else float(h)


def hermite_functions(n_max: int, x, gaussian: bool = True) -> np.ndarray:
    """Rows 0..n_max of normalized oscillator eigenfunctions at ``x``.

    With ``gaussian=False`` the factor exp(-x^2/2) is left out, i.e. the rows
    are the polynomials orthonormal against the weight exp(-x^2).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n_max + 1, x.size))
    out[0] = PI_QUARTER * (np.exp(-0.5 * x * x) if gaussian else 1.0)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = (math.sqrt(2.0 / (n + 1)) * x * out[n]
                      - math.sqrt(n / (n + 1)) * out[n - 1])
    return out


def ho_eigenfunction(n: int, x):
    """Normalized eigenfunction psi_n(x) of H = p^2/2 + x^2/2."""
    if n < 0:
        raise ValueError("n must be non-negative")
    x_arr = np.asarray(x, dtype=float)
    vals = hermite_functions(n, x_arr.ravel())[n]
    return vals.reshape(x_arr.shape) if x_arr.ndim else float(vals[0])


def laguerre(n: int, alpha: int, x):
    """Associated Laguerre polynomial L_n^(alpha)(x) by forward recurrence."""
    if n < 0 or alpha < 0:
        raise ValueError("n and alpha must be non-negative")
    x = np.asarray(x, dtype=float)
    l_prev = np.ones_like(x)
    if n == 0:
        return l_prev if l_prev.ndim else float(l_prev)
    l_cur = 1.0 + alpha - x
    for m in range(1, n):
        l_prev, l_cur = l_cur, ((2 * m + 1 + alpha - x) * l_cur - (m + alpha) * l_prev) / (m + 1)
    return l_cur if l_cur.ndim else float(l_cur)


def laguerre_table(n_max: int, x: float) -> np.ndarray:
    """Table T[n, d] = L_n^(d)(x) for 0 <= n, d <= n_max."""
    alpha = np.arange(n_max + 1, dtype=float)
    table = np.empty((n_max + 1, n_max + 1))
    table[0] = 1.0
    if n_max >= 1:
        table[1] = 1.0 + alpha - x
    for m in range(1, n_max):
        table[m + 1] = ((2 * m + 1 + alpha - x) * table[m] - (m + alpha) * table[m - 1]) / (m + 1)
    return table


def sqrt_factorial_ratio(small: int, large: int) -> float:
    """sqrt(small!/large!) via log-gamma."""
    if small < 0 or large < 0:
        raise ValueError("arguments must be non-negative")
    if small > large:
        raise ValueError(f"small={small} exceeds large={large}")
    if small == large:
        return 1.0
    return math.exp(0.5 * (math.lgamma(small + 1) - math.lgamma(large + 1)))


@lru_cache(maxsize=64)
def gauss_hermite(order: int) -> QuadratureRule:
    """Gauss-Hermite rule for the weight exp(-x^2), nodes ascending."""
    if order < 1:
        raise ValueError("order must be >= 1")
    nodes, weights = hermgauss(order)
    return QuadratureRule(np.ascontiguousarray(nodes), np.ascontiguousarray(weights))
