"""Truncated bivariate power series in two formal variables.

A series is a square array ``c`` with ``c[p, q]`` the coefficient of
``u**p v**q``; products are truncated to the box ``p, q < N``, which is
closed under multiplication.
"""

import numpy as np

from ._kernels import series_mul
from .errors import ParameterError

__all__ = ["pad", "inv_sqrt", "radicand_poly"]


def pad(c, n):
    """Embed (or truncate) ``c`` into an ``n x n`` box."""
    out = np.zeros((n, n))
    m = min(n, c.shape[0])
    out[:m, :m] = c[:m, :m]
    return out


def radicand_poly(q_star, scale=0.5):
    """Coefficients of ``scale * [Q(1-u^2)(1-v^2) + (1+u^2)(1+v^2) - 4uv]``."""
    r = np.zeros((3, 3))
    r[0, 0] = q_star + 1.0
    r[2, 0] = r[0, 2] = 1.0 - q_star
    r[1, 1] = -4.0
    r[2, 2] = q_star + 1.0
    return scale * r


def inv_sqrt(a, order, even=False):
    """Series of ``a**(-1/2)`` to ``order`` terms in each variable.

    Newton iteration ``g <- g + g (1 - a g^2) / 2`` doubles the number of
    correct total degrees per step.  Coefficients at or above the current
    exact degree are discarded after every step: left in place they grow
    without bound for strongly nonadiabatic radicands and their cancellation
    destroys the low-order digits.  ``a`` must be symmetric with a positive
    constant term.
    """
    a = np.asarray(a, dtype=float)
    if a[0, 0] <= 0:
        raise ParameterError("constant term must be positive for a real square root")
    if not np.array_equal(a, a.T):
        raise ParameterError("series must be symmetric in its two variables")
    g = np.array([[a[0, 0] ** -0.5]])
    exact_below = 1
    last = 2 * order - 1  # total degrees 0 .. 2N-2 live in the box
    while exact_below < last:
        exact_below = min(2 * exact_below, last)
        n = min(order, exact_below)
        g = pad(g, n)
        resid = -series_mul(pad(a, n), series_mul(g, g, even), even)
        resid[0, 0] += 1.0
        g = g + 0.5 * series_mul(g, resid, even)
        degree = np.add.outer(np.arange(n), np.arange(n))
        g[degree >= exact_below] = 0.0
    return pad(g, order)
