"""Efficiency rate function, joint rate function and contour grids.

The primary route minimizes ``f(g2) = phi(eta g2, g2)`` on a line through
the origin; ``J(eta) = -min f``.  The independent route computes the joint
rate ``I(q, w)`` as a Legendre-Fenchel transform in two variables and then
contracts it onto ``w = -eta q``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .cgf import REASONS, Cgf
from .errors import EstimationError, ParameterError

__all__ = [
    "SearchConfig",
    "RatePoint",
    "RateFunctionCurve",
    "ContourGrid",
    "LegendreResult",
    "rate_function",
    "rate_curve",
    "legendre_point",
    "legendre_2d",
    "contraction_rate",
    "contour_grid",
    "degeneracy_check",
    "default_eta_grid",
]

CONVERGED = "converged"
DIVERGED = "diverged-to-minus-infinity"
BOUNDARY = "boundary-limited"
DEGENERATE = "degenerate"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchConfig:
    """Bracket schedule for the one-dimensional minimization.

    ``gamma_max`` is in units of the inverse smallest quantum; the scan uses
    ``+-gamma_max * 10**linspace(log_lo, 0, n_scan)`` plus the origin.
    """

    gamma_max: float = 50.0
    j_max: float = 1e3
    tol: float = 1e-10
    n_scan: int = 81
    log_lo: float = -8.0
    degenerate_eta_tol: float = 1e-9

    def __post_init__(self):
        if not (self.gamma_max > 0 and self.j_max > 0 and self.tol > 0 and self.n_scan >= 2):
            raise ParameterError("search settings must be positive")

    def scan(self, min_quantum):
        half = self.gamma_max / min_quantum * 10.0 ** np.linspace(self.log_lo, 0.0, self.n_scan)
        return np.concatenate([-half[::-1], [0.0], half])


@dataclass(frozen=True)
class RatePoint:
    eta: float
    j: float
    argmin_gamma2: Optional[float]
    status: str
    line_minimum: Optional[float] = None

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.j)


@dataclass
class RateFunctionCurve:
    points: list
    eta_th: float
    eta_ca: Optional[float]
    metadata: dict = field(default_factory=dict)

    @property
    def eta(self):
        return np.array([p.eta for p in self.points])

    @property
    def j(self):
        return np.array([p.j for p in self.points])

    @property
    def status(self):
        return [p.status for p in self.points]

    def argmin_eta(self) -> float:
        return float(self.eta[int(np.argmin(self.j))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["eta", "j", "argmin_gamma2", "status"])
        for p in self.points:
            out.writerow([_fmt(p.eta), _fmt(p.j), _fmt(p.argmin_gamma2), p.status])
        return buf.getvalue()


def _fmt(x):
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def default_eta_grid(n=201, lo=-0.5, hi=1.5):
    return np.linspace(lo, hi, n)


# --------------------------------------------------------------------------
# one-dimensional route
# --------------------------------------------------------------------------

def _golden(f, a, b, tol):
    """Golden-section minimum of ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _domain_edge(f, inside, outside, tol):
    """Bisect to the last finite point between ``inside`` and ``outside``."""
    while abs(outside - inside) > tol:
        mid = 0.5 * (inside + outside)
        if math.isfinite(f(mid)):
            inside = mid
        else:
            outside = mid
    return inside


def _line_minimum(cgf, eta, search):
    """Minimize ``phi(eta g, g)``; returns ``(g*, f*, status)``."""
    def f(g):
        v = cgf.evaluate(eta * g, g)
        return float(v) if np.isfinite(v) else math.inf

    grid = search.scan(cgf.min_quantum)
    vals = cgf.evaluate(eta * grid, grid)
    vals = np.where(np.isfinite(vals), vals, np.inf)
    zero = grid.size // 2
    if not np.isfinite(vals[zero]):
        raise ParameterError("generating function is undefined at the origin")
    lo = zero
    while lo > 0 and np.isfinite(vals[lo - 1]):
        lo -= 1
    hi = zero
    while hi < grid.size - 1 and np.isfinite(vals[hi + 1]):
        hi += 1
    i = lo + int(np.argmin(vals[lo:hi + 1]))
    if vals[i] < -search.j_max:
        return grid[i], -math.inf, DIVERGED

    left_open = i == lo and lo > 0  # undefined region just beyond the scan point
    right_open = i == hi and hi < grid.size - 1
    if left_open or right_open:
        outside = grid[i - 1] if left_open else grid[i + 1]
        edge = _domain_edge(f, grid[i], outside, search.tol)
        inner = grid[i + 1] if left_open else grid[i - 1]
        x, fx = _golden(f, min(inner, edge), max(inner, edge), search.tol)
        fe = f(edge)
        if fe < fx:
            x, fx = edge, fe
        if fx < -search.j_max:
            return x, -math.inf, DIVERGED
        status = BOUNDARY if abs(x - edge) <= 10 * search.tol * max(1.0, abs(edge)) else CONVERGED
        return x, fx, status

    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    x, fx = _golden(f, a, b, search.tol)
    if vals[i] < fx:
        x, fx = grid[i], float(vals[i])
    if i in (0, grid.size - 1):
        # minimum at the bracket edge: still falling there
        if fx < -search.j_max:
            return x, -math.inf, DIVERGED
        return x, fx, BOUNDARY
    return x, fx, CONVERGED


def rate_function(cgf: Cgf, eta, search: SearchConfig = SearchConfig()) -> RatePoint:
    """``J(eta) = -min_g phi(eta g, g)``.

    When ``phi`` is constant along lines of slope ``eta_th`` (adiabatic
    engines) every block with nonzero heat has efficiency ``eta_th``, so
    ``J`` is infinite for any other ``eta``; such points get status
    ``degenerate`` with ``j = inf``, and ``line_minimum`` still reports the
    finite value ``-min f`` of the line search.
    """
    eta = float(eta)
    g, fmin, status = _line_minimum(cgf, eta, search)
    line_min = -fmin
    j = max(0.0, line_min)
    slope = cgf.degenerate_slope
    if slope is not None:
        if abs(eta - slope) > search.degenerate_eta_tol:
            return RatePoint(eta, math.inf, float(g), DEGENERATE, line_min)
        return RatePoint(eta, 0.0, 0.0, CONVERGED, line_min)
    if status == DIVERGED:
        return RatePoint(eta, math.inf, float(g), DIVERGED, math.inf)
    return RatePoint(eta, j, float(g), status, line_min)


def rate_curve(cgf: Cgf, eta_grid=None, search: SearchConfig = SearchConfig(),
               include_eta_th=False, threads=1) -> RateFunctionCurve:
    """Rate function on a monotone grid; point failures are recorded, not raised.

    Points are independent; with ``threads > 1`` they are evaluated on a
    thread pool and collected in grid order, so the result is unchanged.
    """
    eta_grid = default_eta_grid() if eta_grid is None else np.asarray(eta_grid, dtype=float)
    if eta_grid.ndim != 1 or eta_grid.size == 0:
        raise ParameterError("eta grid must be a nonempty 1-d array")
    if eta_grid.size > 1 and not np.all(np.diff(eta_grid) > 0):
        raise ParameterError("eta grid must be strictly increasing")
    eta_th = cgf.eta_th
    if include_eta_th and not np.any(eta_grid == eta_th):
        eta_grid = np.sort(np.append(eta_grid, eta_th))
    cgf.degenerate_slope  # populate cached properties before sharing across threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            points = list(pool.map(lambda eta: rate_function(cgf, eta, search), eta_grid))
    else:
        points = [rate_function(cgf, eta, search) for eta in eta_grid]
    meta = {
        "degenerate": cgf.degenerate_slope is not None,
        "gamma_max": search.gamma_max / cgf.min_quantum,
        "j_max": search.j_max,
    }
    return RateFunctionCurve(points, eta_th, cgf.eta_ca, meta)


# --------------------------------------------------------------------------
# two-dimensional route
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LegendreResult:
    value: float
    gamma: tuple
    converged: bool


_STENCIL = np.array([(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1),
                     (1, 1), (1, -1), (-1, 1), (-1, -1)], dtype=float)


def _derivatives(cgf, gam, h):
    """Value, gradient and Hessian of ``phi`` at each row of ``gam`` (nine-point stencil)."""
    pts = gam[:, None, :] + h * _STENCIL[None, :, :]
    v = cgf.evaluate(pts[..., 0], pts[..., 1])
    f0 = v[:, 0]
    grad = np.stack([(v[:, 1] - v[:, 2]) / (2 * h), (v[:, 3] - v[:, 4]) / (2 * h)], axis=1)
    h11 = (v[:, 1] - 2 * f0 + v[:, 2]) / h**2
    h22 = (v[:, 3] - 2 * f0 + v[:, 4]) / h**2
    h12 = (v[:, 5] - v[:, 6] - v[:, 7] + v[:, 8]) / (4 * h**2)
    hess = np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)
    return f0, grad, hess


def legendre_point(cgf: Cgf, q, w, starts=5, start_scale=0.5, gamma_max=50.0,
                   max_iter=200, tol=1e-11):
    """``I(q, w) = sup_g [g1 q + g2 w - phi(g1, g2)]`` by damped Newton ascent.

    All ``starts x starts`` initial points on ``[-s, s]^2`` (``s`` =
    ``start_scale`` over the smallest quantum) are advanced together; starts
    outside the domain are dropped.  The best objective wins, ties going to
    the smallest ``|g|``.
    """
    mq = cgf.min_quantum
    box = gamma_max / mq
    h = 1e-4 / mq
    axis = np.linspace(-start_scale, start_scale, starts) / mq
    gam = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
    x = np.array([q, w], dtype=float)

    def objective(g):
        return g @ x - cgf.evaluate(g[:, 0], g[:, 1])

    obj = objective(gam)
    keep = np.isfinite(obj)
    gam, obj = gam[keep], obj[keep]
    done = np.zeros(len(gam), dtype=bool)
    for _ in range(max_iter):
        active = ~done
        if not active.any():
            break
        g = gam[active]
        _, grad, hess = _derivatives(cgf, g, h)
        r = x - grad  # ascent gradient
        step = np.empty_like(g)
        for k in range(len(g)):
            hk = hess[k]
            if not np.all(np.isfinite(hk)) or not np.all(np.isfinite(r[k])):
                step[k] = 0.0
                continue
            lam = 0.0
            scale = max(abs(hk[0, 0]), abs(hk[1, 1]), 1e-300)
            while True:
                m = hk + lam * scale * np.eye(2)
                if m[0, 0] > 0 and np.linalg.det(m) > 0:
                    break
                lam = 1e-6 if lam == 0.0 else lam * 10
            step[k] = np.linalg.solve(m, r[k])
        # backtracking on the true objective
        idx = np.flatnonzero(active)
        alpha = np.ones(len(g))
        base = obj[active]
        trial = np.clip(g + step, -box, box)
        val = objective(trial)
        for _ in range(60):
            bad = ~(val >= base - 1e-15 * (1 + abs(base)))
            if not bad.any():
                break
            alpha[bad] *= 0.5
            trial[bad] = np.clip(g[bad] + alpha[bad, None] * step[bad], -box, box)
            val[bad] = objective(trial[bad])
        bad = ~(val >= base - 1e-15 * (1 + abs(base)))
        val[bad], trial[bad] = base[bad], g[bad]
        moved = np.max(np.abs(trial - g), axis=1)
        gam[idx], obj[idx] = trial, val
        done[idx[(moved <= tol * (1 + np.max(np.abs(g), axis=1))) | bad]] = True

    if len(gam) == 0:
        raise EstimationError("no start point lies inside the domain")
    _, grad, _ = _derivatives(cgf, gam, h)
    resid = np.max(np.abs(x - grad), axis=1)
    best = np.max(obj)
    ties = np.flatnonzero(obj >= best - 1e-12 * (1 + abs(best)))
    k = ties[np.argmin(np.hypot(gam[ties, 0], gam[ties, 1]))]
    conv = bool(np.isfinite(resid[k]) and resid[k] < 1e-5 * (1 + np.abs(x).max()))
    return LegendreResult(float(max(obj[k], 0.0)), (float(gam[k, 0]), float(gam[k, 1])), conv)


def legendre_2d(cgf: Cgf, q_grid, w_grid, **kwargs):
    """Joint rate ``I`` on the grid; returns ``(values[nw, nq], converged[nw, nq])``."""
    q_grid = np.asarray(q_grid, dtype=float)
    w_grid = np.asarray(w_grid, dtype=float)
    values = np.empty((w_grid.size, q_grid.size))
    conv = np.empty(values.shape, dtype=bool)
    for i, w in enumerate(w_grid):
        for k, q in enumerate(q_grid):
            res = legendre_point(cgf, q, w, **kwargs)
            values[i, k] = res.value
            conv[i, k] = res.converged
    return values, conv


def contraction_rate(cgf: Cgf, eta, width=8.0, xtol=1e-9, **kwargs):
    """``min_q I(q, -eta q)`` over ``q`` within ``width`` standard deviations of ``<Q2>``."""
    mq = cgf.mean[0]
    h = 1e-3 / cgf.min_quantum
    v = cgf.evaluate(np.array([h, 0.0, -h]), np.zeros(3))
    sigma = math.sqrt(max((v[0] + v[2]) / h**2, 0.0)) or 1.0
    lo, hi = mq - width * sigma, mq + width * sigma

    def obj(q):
        return legendre_point(cgf, q, -eta * q, **kwargs).value

    res = minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                          options={"xatol": xtol * max(1.0, abs(mq))})
    return float(res.fun), float(res.x)


# --------------------------------------------------------------------------
# contour grids and degeneracy
# --------------------------------------------------------------------------

@dataclass
class ContourGrid:
    gamma1: np.ndarray
    gamma2: np.ndarray
    values: np.ndarray  # [len(gamma2), len(gamma1)], nan where undefined
    reasons: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def mask(self):
        """True where the generating function is undefined."""
        return self.reasons != 0

    def to_json(self, provenance=None) -> str:
        vals = [[None if m else float(v) for v, m in zip(row, mrow)]
                for row, mrow in zip(self.values, self.mask)]
        doc = {
            "gamma1": self.gamma1.tolist(),
            "gamma2": self.gamma2.tolist(),
            "values": vals,
            "undefined_mask": self.mask.astype(int).tolist(),
            "undefined_reasons": {str(k): v for k, v in REASONS.items()},
            "reason_codes": self.reasons.astype(int).tolist(),
            "metadata": self.metadata,
        }
        if provenance is not None:
            doc["provenance"] = provenance
        return json.dumps(doc, indent=1, allow_nan=False)


def contour_grid(cgf: Cgf, bounds=(-2.0, 2.0, -2.0, 2.0), resolution=(101, 101)) -> ContourGrid:
    """``phi`` on a ``gamma2 x gamma1`` lattice; ``bounds = (g1_lo, g1_hi, g2_lo, g2_hi)``."""
    g1_lo, g1_hi, g2_lo, g2_hi = (float(b) for b in bounds)
    if not all(math.isfinite(b) for b in bounds):
        raise ParameterError("contour bounds must be finite")
    if not (g1_hi > g1_lo and g2_hi > g2_lo):
        raise ParameterError("contour window has zero area")
    n1, n2 = resolution
    if n1 < 2 or n2 < 2:
        raise ParameterError("contour resolution must be at least 2 x 2")
    g1 = np.linspace(g1_lo, g1_hi, int(n1))
    g2 = np.linspace(g2_lo, g2_hi, int(n2))
    G1, G2 = np.meshgrid(g1, g2)
    values = cgf.evaluate(G1, G2)
    reasons = cgf.reasons(G1, G2)
    return ContourGrid(g1, g2, values, reasons)


def degeneracy_check(cgf: Cgf, eta_th, tolerance=1e-10) -> bool:
    """True iff ``phi`` is constant (to ``tolerance``) along lines of slope ``eta_th``."""
    from .cgf import line_variation

    return bool(line_variation(cgf, float(eta_th)) < tolerance)
