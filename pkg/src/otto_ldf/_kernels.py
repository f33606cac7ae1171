"""Hot inner loops, each with a numba and a pure-numpy implementation.

The backend is chosen once at import time from the ``OTTO_LDF_BACKEND``
environment variable (``numba`` or ``numpy``).  When the variable is unset
numba is used if it imports.  Both implementations accumulate in the same
order, so they agree bit for bit on the same inputs.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

__all__ = [
    "BACKEND",
    "series_mul",
    "lattice_joint",
    "inverse_cdf",
]

_requested = os.environ.get("OTTO_LDF_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"OTTO_LDF_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
if _requested == "numba" and numba is None:
    raise ImportError("OTTO_LDF_BACKEND=numba but numba is not importable")
HAVE_NUMBA = numba is not None
BACKEND = _requested or ("numba" if HAVE_NUMBA else "numpy")


# --------------------------------------------------------------------------
# truncated bivariate power-series product
# --------------------------------------------------------------------------

def series_mul_numpy(a, b, even=False):
    """Product of two symmetric bivariate series truncated to ``a.shape``.

    ``c[p, q] = sum_{i<=p, j<=q} a[i, j] * b[p-i, q-j]``.  Only the upper
    triangle is accumulated and then mirrored, so both inputs must be
    symmetric.  With ``even=True`` the inputs are assumed to vanish at odd
    total degree and the odd entries of the result are left at zero.
    """
    # whole blocks are accumulated; odd entries only ever receive exact zeros
    # when ``even`` holds, so the upper triangle matches the loop kernel.
    n = a.shape[0]
    c = np.zeros_like(a)
    rows, cols = np.nonzero(a)
    for i, j in zip(rows.tolist(), cols.tolist()):
        c[i:, j:] += a[i, j] * b[:n - i, :n - j]
    iu = np.triu_indices(n, 1)
    c[iu[1], iu[0]] = c[iu]
    return c


def _series_mul_loops(a, b, even):
    n = a.shape[0]
    c = np.zeros_like(a)
    step = 2 if even else 1
    for i in range(n):
        for j in range(n):
            aij = a[i, j]
            if aij == 0.0:
                continue
            for p in range(i, n):
                q0 = max(p, j)
                if even and (p + q0) % 2 == 1:
                    q0 += 1
                for q in range(q0, n, step):
                    c[p, q] += aij * b[p - i, q - j]
    for p in range(n):
        for q in range(p + 1, n):
            c[q, p] = c[p, q]
    return c


# --------------------------------------------------------------------------
# joint lattice distribution of (k - m, l - n)
# --------------------------------------------------------------------------

def lattice_joint_numpy(a, b):
    """Distribution of ``(k - m, l - n)`` for independent pairs ``(n, m) ~ a`` and ``(k, l) ~ b``.

    Returns an array of shape ``(2N-1, 2N-1)`` indexed by offsets
    ``(k - m + N - 1, l - n + N - 1)``.
    """
    n = a.shape[0]
    out = np.zeros((2 * n - 1, 2 * n - 1))
    rows, cols = np.nonzero(a)
    for i, m in zip(rows.tolist(), cols.tolist()):
        out[n - 1 - m:2 * n - 1 - m, n - 1 - i:2 * n - 1 - i] += a[i, m] * b
    return out


def _lattice_joint_loops(a, b):
    n = a.shape[0]
    out = np.zeros((2 * n - 1, 2 * n - 1))
    for i in range(n):
        for m in range(n):
            aim = a[i, m]
            if aim == 0.0:
                continue
            for k in range(n):
                for l in range(n):
                    out[k - m + n - 1, l - i + n - 1] += aim * b[k, l]
    return out


# --------------------------------------------------------------------------
# inverse-CDF sampling of rows of a stochastic matrix
# --------------------------------------------------------------------------

def inverse_cdf_numpy(cum, rows, u):
    """Draw column indices from the cumulative rows ``cum[rows]`` using uniforms ``u``."""
    out = np.empty(rows.shape[0], dtype=np.int64)
    for r in np.unique(rows):
        sel = rows == r
        target = u[sel] * cum[r, -1]
        out[sel] = np.searchsorted(cum[r], target, side="right")
    return np.minimum(out, cum.shape[1] - 1)


def _inverse_cdf_loops(cum, rows, u):
    size = rows.shape[0]
    ncol = cum.shape[1]
    out = np.empty(size, dtype=np.int64)
    for s in range(size):
        r = rows[s]
        target = u[s] * cum[r, ncol - 1]
        lo = 0
        hi = ncol
        while lo < hi:
            mid = (lo + hi) // 2
            if cum[r, mid] <= target:
                lo = mid + 1
            else:
                hi = mid
        out[s] = min(lo, ncol - 1)
    return out


if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)
    series_mul_numba = _jit(_series_mul_loops)
    lattice_joint_numba = _jit(_lattice_joint_loops)
    inverse_cdf_numba = _jit(_inverse_cdf_loops)
else:  # pragma: no cover
    series_mul_numba = lattice_joint_numba = inverse_cdf_numba = None


def series_mul(a, b, even=False):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if BACKEND == "numba":
        return series_mul_numba(a, b, even)
    return series_mul_numpy(a, b, even)


def lattice_joint(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if BACKEND == "numba":
        return lattice_joint_numba(a, b)
    return lattice_joint_numpy(a, b)


def inverse_cdf(cum, rows, u):
    cum = np.ascontiguousarray(cum, dtype=np.float64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if BACKEND == "numba":
        return inverse_cdf_numba(cum, rows, u)
    return inverse_cdf_numpy(cum, rows, u)
