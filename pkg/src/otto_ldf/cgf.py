"""Scaled cumulant generating functions ``phi(g1, g2) = ln <exp(g1 Q2 + g2 W)>``.

``g1`` is conjugate to the heat drawn from the hot bath and ``g2`` to the
total work.  Every analytic variant is normalized by its own value at the
origin, so ``phi(0, 0) == 0`` exactly.  Points outside the convergence
domain evaluate to :class:`Undefined` (scalar API) or ``nan`` (array API,
with the reason available from :meth:`Cgf.reasons`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .engines import HarmonicEngine, ScaleInvariantEngine, TwoLevelEngine
from .errors import ParameterError

__all__ = [
    "Undefined",
    "Cgf",
    "TwoLevelCgf",
    "HarmonicCgf",
    "ScaleInvariantCgf",
    "DistributionCgf",
    "make_cgf",
    "cgf_two_level",
    "cgf_harmonic",
    "cgf_scale_invariant",
    "cgf_two_level_linear",
    "cgf_harmonic_linear",
    "cgf_from_distribution",
    "line_variation",
    "REASONS",
]

OK = 0
RADICAND = 1
SERIES = 2
SPECTRAL = 3
EXPANSION = 4
REASONS = {
    RADICAND: "radicand-nonpositive",
    SERIES: "series-divergent",
    SPECTRAL: "spectral-sum-divergent",
    EXPANSION: "nonpositive-expansion",
}


@dataclass(frozen=True)
class Undefined:
    """Marker for a point outside the convergence domain."""

    reason: str

    def __float__(self):
        return float("inf")


class Cgf:
    """Base class for CGF evaluators bound to one engine and bath pair.

    Subclasses implement ``_raw(g1, g2) -> (log_mgf, code)`` on broadcast
    arrays.  Evaluators hold no mutable state beyond cached scalars, so one
    instance can be shared across threads.
    """

    normalize = True
    adiabatic = False

    def __init__(self, engine=None, baths=None):
        self.engine = engine
        self.baths = baths

    def _raw(self, g1, g2):
        raise NotImplementedError

    @property
    def min_quantum(self) -> float:
        return float(min(self.engine.quanta))

    @cached_property
    def _origin(self):
        with np.errstate(all="ignore"):
            value, code = self._raw(np.zeros(1), np.zeros(1))
        if code[0] != OK:
            raise ParameterError("generating function is undefined at the origin")
        return float(value[0])

    def evaluate(self, g1, g2):
        """Vectorized values; ``nan`` where undefined."""
        g1, g2 = np.broadcast_arrays(np.asarray(g1, dtype=float), np.asarray(g2, dtype=float))
        with np.errstate(all="ignore"):
            value, code = self._raw(g1, g2)
        value = np.where(code == OK, value, np.nan)
        if self.normalize:
            value = value - self._origin
        return value

    def reasons(self, g1, g2):
        """Integer reason codes (0 where defined); see :data:`REASONS`."""
        g1, g2 = np.broadcast_arrays(np.asarray(g1, dtype=float), np.asarray(g2, dtype=float))
        with np.errstate(all="ignore"):
            return self._raw(g1, g2)[1]

    def __call__(self, g1, g2):
        with np.errstate(all="ignore"):
            value, code = self._raw(np.array([float(g1)]), np.array([float(g2)]))
        if code[0] != OK:
            return Undefined(REASONS[int(code[0])])
        value = float(value[0])
        if self.normalize:
            value -= self._origin
        return value

    @cached_property
    def mean(self):
        """``(<Q2>, <W>)`` from Richardson-extrapolated central differences at the origin."""
        h = 1e-3 / self.min_quantum

        def slope(d1, d2):
            est = []
            for step in (h, h / 2):
                hi = self.evaluate(step * d1, step * d2)
                lo = self.evaluate(-step * d1, -step * d2)
                est.append((hi - lo) / (2 * step))
            return float((4 * est[1] - est[0]) / 3)

        return slope(1.0, 0.0), slope(0.0, 1.0)

    @cached_property
    def eta_th(self) -> float:
        """Macroscopic efficiency ``-<W>/<Q2>``; exact ``1 - eps^2`` for adiabatic models."""
        if self.adiabatic:
            return 1.0 - self.engine.eps_tau_sq
        mq, mw = self.mean
        return -mw / mq

    @property
    def eta_ca(self):
        return None if self.baths is None else self.baths.eta_carnot

    @cached_property
    def degenerate_slope(self):
        """``eta_th`` when ``phi`` is constant along ``(eta_th, 1)``, else ``None``."""
        slope = self.eta_th
        if line_variation(self, slope) < DEGENERACY_TOL:
            return slope
        return None


DEGENERACY_TOL = 1e-10


def line_variation(cgf, slope, extent=1.0, points=7):
    """Largest ``|phi(g1 + slope d, g2 + d) - phi(g1, g2)|`` over a fixed sample.

    Base points span ``[-extent, extent]^2`` and shifts ``d`` are
    ``+-extent/2, +-extent``, all in units of the inverse smallest quantum.
    Pairs with either end outside the domain are skipped; with no pair left
    the result is ``inf``.
    """
    scale = extent / cgf.min_quantum
    axis = np.linspace(-scale, scale, points)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    base = cgf.evaluate(g1, g2)
    worst = -np.inf
    for d in (-scale, -scale / 2, scale / 2, scale):
        shifted = cgf.evaluate(g1 + slope * d, g2 + d)
        ok = np.isfinite(base) & np.isfinite(shifted)
        if ok.any():
            worst = max(worst, float(np.max(np.abs(shifted[ok] - base[ok]))))
    return np.inf if worst == -np.inf else worst


# --------------------------------------------------------------------------
# two-level engine
# --------------------------------------------------------------------------

def _log2cosh(z):
    return np.logaddexp(z, -z)


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(x) if x > 0 else -np.inf


def two_level_terms(engine, baths, linear=False):
    """Ten ``(log coefficient, Q2, W)`` terms of the two-level generating function.

    Coefficients carry the occupation and transition weights; the cold
    ground state has weight ``e^x`` with ``x = beta_c nu0`` and the hot
    ground state ``e^y`` with ``y = beta_h nu_tau``.  With ``linear=True``
    the weights ``u^2, v^2, uv`` are replaced by their first-order
    expansion about ``u = 1``.
    """
    x = baths.beta_c * engine.nu0
    y = baths.beta_h * engine.nu_tau
    u = engine.u
    if linear:
        eps = u - 1.0
        uu, vv, uv = 1.0 + 2.0 * eps, 0.0, -eps
    else:
        uu, vv, uv = u * u, engine.v ** 2, u * engine.v
    luu, lvv, luv = _safe_log(uu), _safe_log(vv), _safe_log(uv)
    a, b = engine.quanta  # 2 nu0, 2 nu_tau
    terms = [
        (luu + _log2cosh(x + y), 0.0, 0.0),
        (lvv + _log2cosh(x - y), 0.0, 0.0),
        (luv - x + _log2cosh(y), 0.0, -a),
        (luv + x + _log2cosh(y), 0.0, a),
        (luu + x - y, b, a - b),
        (lvv - x - y, b, -(a + b)),
        (luv - y + _log2cosh(x), b, -b),
        (luu - x + y, -b, b - a),
        (lvv + x + y, -b, a + b),
        (luv + y + _log2cosh(x), -b, b),
    ]
    return np.array(terms, dtype=float)


class TwoLevelCgf(Cgf):
    """Exact (or first-order in ``u - 1``) two-level CGF; entire in ``(g1, g2)``."""

    def __init__(self, engine: TwoLevelEngine, baths, linear=False):
        if not isinstance(engine, TwoLevelEngine):
            raise ParameterError("TwoLevelCgf needs a TwoLevelEngine")
        super().__init__(engine, baths)
        self.linear = linear
        self.adiabatic = engine.is_adiabatic
        self._terms = two_level_terms(engine, baths, linear)

    def _raw(self, g1, g2):
        logc, q2, w = self._terms.T
        expo = logc + g1[..., None] * q2 + g2[..., None] * w
        return logsumexp(expo, axis=-1), np.zeros(g1.shape, dtype=np.int8)


# --------------------------------------------------------------------------
# harmonic engine
# --------------------------------------------------------------------------

def _log_abs_one_minus_exp(z):
    """``log|1 - e^z|`` and the sign of ``1 - e^z``."""
    neg = z < 0
    mag = np.where(neg, np.log(-np.expm1(np.minimum(z, 0.0))),
                   z + np.log(-np.expm1(-np.maximum(z, 0.0))))
    return mag, np.sign(-z)


def _harmonic_factor(log_a, log_b, q_star, linear):
    """Log of one stroke's generating function at positive ``(a, b)`` up to a constant.

    Exact: ``-log(1 - ab) - log1p(z)/2`` with ``z = (Q-1)(1-a^2)(1-b^2) / (2(1-ab)^2)``,
    which is ``-log sqrt(R)/sqrt(2)`` for the radicand ``R``.  Linear: the
    corresponding first-order correction ``-(Q-1)/4 * ...`` is returned
    separately so the caller can add both strokes before taking the log.
    """
    s = log_a + log_b
    code = np.where(s < 0, OK, SERIES).astype(np.int8)
    log_t = np.log(-np.expm1(np.minimum(s, -1e-300)))
    la, sa = _log_abs_one_minus_exp(2 * log_a)
    lb, sb = _log_abs_one_minus_exp(2 * log_b)
    ratio = sa * sb * np.exp(la + lb - 2 * log_t)
    if linear:
        return -log_t, -(q_star - 1.0) / 4.0 * ratio, code
    z = (q_star - 1.0) / 2.0 * ratio
    if q_star != 1.0:
        code = np.where((code == OK) & ~(1.0 + z > 0), RADICAND, code).astype(np.int8)
    return -log_t - 0.5 * np.log1p(z), None, code


class HarmonicCgf(Cgf):
    """Harmonic CGF from the closed-form transition generating function.

    The domain requires ``u0 v0 < 1``, ``x0 y0 < 1`` and both radicands
    positive, where ``u0 = e^{-w0(bc+g2)}``, ``v0 = e^{wt(g2-g1)}``,
    ``x0 = e^{-bh wt + wt(g1-g2)}`` and ``y0 = e^{w0 g2}``.
    """

    def __init__(self, engine: HarmonicEngine, baths, linear=False):
        if not isinstance(engine, HarmonicEngine):
            raise ParameterError("HarmonicCgf needs a HarmonicEngine")
        super().__init__(engine, baths)
        self.linear = linear
        self.adiabatic = engine.is_adiabatic

    def wick_variables(self, g1, g2):
        """Logs of ``(u0, v0, x0, y0)``."""
        w0, wt = self.engine.omega0, self.engine.omega_tau
        bc, bh = self.baths.beta_c, self.baths.beta_h
        return (-w0 * (bc + g2), wt * (g2 - g1), -bh * wt + wt * (g1 - g2), w0 * g2)

    def _raw(self, g1, g2):
        lu, lv, lx, ly = self.wick_variables(g1, g2)
        q = self.engine.q_star
        f_exp, c_exp, code_exp = _harmonic_factor(lu, lv, q, self.linear)
        f_com, c_com, code_com = _harmonic_factor(lx, ly, q, self.linear)
        code = np.maximum(code_exp, code_com)
        code = np.where(code_exp == SERIES, SERIES, code)
        code = np.where(code_com == SERIES, SERIES, code).astype(np.int8)
        value = f_exp + f_com
        if self.linear:
            bracket = 1.0 + c_exp + c_com
            code = np.where((code == OK) & ~(bracket > 0), EXPANSION, code).astype(np.int8)
            value = value + np.log(bracket)
        return value, code


# --------------------------------------------------------------------------
# scale-invariant adiabatic engine
# --------------------------------------------------------------------------

class ScaleInvariantCgf(Cgf):
    """Adiabatic CGF of a scale-invariant spectrum.

    Depends on ``(g1, g2)`` only through ``c = g1/eps^2 + g2 (1 - 1/eps^2)``,
    hence is constant along lines of slope ``1 - eps^2``.
    """

    adiabatic = True

    def __init__(self, engine: ScaleInvariantEngine, baths):
        if not isinstance(engine, ScaleInvariantEngine):
            raise ParameterError("ScaleInvariantCgf needs a ScaleInvariantEngine")
        super().__init__(engine, baths)
        self._e0 = np.asarray(engine.spectrum)

    def _raw(self, g1, g2):
        inv = 1.0 / self.engine.eps_tau_sq
        c = g1 * inv + g2 * (1.0 - inv)
        beta_cold = self.baths.beta_c + c
        beta_hot = self.baths.beta_h * inv - c
        e = self._e0
        value = (logsumexp(-beta_cold[..., None] * e, axis=-1)
                 + logsumexp(-beta_hot[..., None] * e, axis=-1))
        code = np.zeros(c.shape, dtype=np.int8)
        if not self.engine.bounded:
            code[(beta_cold <= 0) | (beta_hot <= 0)] = SPECTRAL
        return value, code


# --------------------------------------------------------------------------
# brute-force oracle
# --------------------------------------------------------------------------

class DistributionCgf(Cgf):
    """``ln sum_atoms p exp(g1 q2 + g2 w)`` over an explicit joint distribution.

    Not renormalized: at the origin it returns ``ln(1 - tail_mass)``.
    """

    normalize = False

    def __init__(self, dist, baths=None, chunk=64):
        super().__init__(None, baths)
        self.dist = dist
        self.chunk = chunk

    @property
    def min_quantum(self) -> float:
        if self.dist.quanta is not None:
            return float(min(self.dist.quanta))
        vals = np.unique(np.abs(np.concatenate([self.dist.q2, self.dist.w])))
        vals = vals[vals > 0]
        return float(vals[0]) if vals.size else 1.0

    @cached_property
    def eta_th(self) -> float:
        p = self.dist.p
        return -float(np.dot(p, self.dist.w)) / float(np.dot(p, self.dist.q2))

    def _raw(self, g1, g2):
        d = self.dist
        flat1, flat2 = g1.ravel(), g2.ravel()
        out = np.empty(flat1.shape)
        for start in range(0, flat1.size, self.chunk):
            s = slice(start, start + self.chunk)
            expo = flat1[s, None] * d.q2 + flat2[s, None] * d.w
            out[s] = logsumexp(expo, axis=-1, b=d.p)
        return out.reshape(g1.shape), np.zeros(g1.shape, dtype=np.int8)


# --------------------------------------------------------------------------
# functional API
# --------------------------------------------------------------------------

def make_cgf(engine, baths, regime="exact"):
    """Evaluator for ``engine`` in ``regime`` (``exact``, ``linear`` or ``adiabatic``)."""
    if regime not in ("exact", "linear", "adiabatic"):
        raise ParameterError(f"unknown regime {regime!r}")
    if isinstance(engine, ScaleInvariantEngine):
        if regime == "linear":
            raise ParameterError("scale-invariant engines are adiabatic; no linear regime")
        return ScaleInvariantCgf(engine, baths)
    if regime == "adiabatic":
        if isinstance(engine, TwoLevelEngine):
            engine = TwoLevelEngine(engine.nu0, engine.nu_tau, 1.0)
        else:
            engine = HarmonicEngine(engine.omega0, engine.omega_tau, 1.0)
    linear = regime == "linear"
    if isinstance(engine, TwoLevelEngine):
        return TwoLevelCgf(engine, baths, linear)
    if isinstance(engine, HarmonicEngine):
        return HarmonicCgf(engine, baths, linear)
    raise ParameterError(f"unknown engine type {type(engine).__name__}")


def cgf_two_level(g1, g2, engine, baths):
    return TwoLevelCgf(engine, baths)(g1, g2)


def cgf_harmonic(g1, g2, engine, baths):
    return HarmonicCgf(engine, baths)(g1, g2)


def cgf_scale_invariant(g1, g2, engine, baths):
    return ScaleInvariantCgf(engine, baths)(g1, g2)


def cgf_two_level_linear(g1, g2, engine, baths):
    return TwoLevelCgf(engine, baths, linear=True)(g1, g2)


def cgf_harmonic_linear(g1, g2, engine, baths):
    return HarmonicCgf(engine, baths, linear=True)(g1, g2)


def cgf_from_distribution(g1, g2, dist):
    return DistributionCgf(dist)(g1, g2)
