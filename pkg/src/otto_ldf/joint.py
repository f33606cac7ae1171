"""Per-cycle joint distribution of heat input and work via projective energy measurements.

One cycle is the chain expansion ``n -> m``, full thermalization with the
hot bath to ``k``, compression ``k -> l`` and full thermalization with the
cold bath.  With equally spaced spectra the heat ``Q2 = E_k - E_m`` and the
work ``W = (E_m - E_n) + (E_l - E_k)`` are integer combinations of the two
level spacings, so atoms are keyed by the integer offsets ``(k - m, l - n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .engines import (
    DEFAULT_GIBBS_TAIL,
    HarmonicEngine,
    ScaleInvariantEngine,
    TwoLevelEngine,
    gibbs_levels,
    thermal_weights,
)
from .errors import NumericalInstabilityError, ParameterError, TruncationError
from .series import inv_sqrt, radicand_poly

__all__ = [
    "TransitionMatrix",
    "JointDistribution",
    "MomentSummary",
    "harmonic_transitions",
    "build_joint",
    "build_joint_two_level",
    "build_joint_harmonic",
    "build_joint_adiabatic_scale_invariant",
    "moments",
    "DEFAULT_TAIL_TOLERANCE",
]

DEFAULT_TAIL_TOLERANCE = 1e-10
NEGATIVE_COEFF_TOL = 1e-12
MAX_LEVELS = 2048
# rows of the cold-side weight matrix beyond this cumulative mass are dropped
# before the quadruple sum; their mass is booked into ``tail_mass``
_NEGLIGIBLE_ROW_MASS = 1e-18


@dataclass(frozen=True)
class TransitionMatrix:
    """Harmonic transition probabilities ``P[n, m]`` for one driving stroke."""

    entries: np.ndarray
    q_star: float

    @property
    def n_levels(self) -> int:
        return self.entries.shape[0]

    @property
    def row_sums(self):
        return self.entries.sum(axis=1)

    @property
    def col_sums(self):
        return self.entries.sum(axis=0)


@dataclass(frozen=True)
class JointDistribution:
    """Atoms ``(q2, w, p)`` sorted by ``(q2, w)``; ``tail_mass`` was lost to truncation."""

    q2: np.ndarray
    w: np.ndarray
    p: np.ndarray
    tail_mass: float = 0.0
    quanta: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.q2.shape == self.w.shape == self.p.shape) or self.p.ndim != 1:
            raise ParameterError("q2, w and p must be 1-d arrays of equal length")
        if self.p.size == 0:
            raise ParameterError("a joint distribution needs at least one atom")
        if np.any(self.p < 0):
            raise ParameterError("probabilities must be non-negative")

    def __len__(self):
        return self.p.size

    @property
    def total(self) -> float:
        return math.fsum(self.p.tolist())

    def to_rows(self):
        return zip(self.q2.tolist(), self.w.tolist(), self.p.tolist())

    def to_csv(self) -> str:
        lines = ["q2,w,p"]
        lines += ["%.17g,%.17g,%.17g" % row for row in self.to_rows()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MomentSummary:
    mean_q2: float
    mean_w: float
    var_q2: float
    var_w: float
    cov_qw: float
    pearson: Optional[float]
    eta_macroscopic: Optional[float]

    @property
    def pearson_degenerate(self) -> bool:
        return self.pearson is None

    @property
    def is_engine(self) -> bool:
        """Heat is absorbed from the hot bath and work is delivered on average."""
        return self.mean_q2 > 0 and self.mean_w < 0


def harmonic_transitions(q_star, n_levels):
    """Expansion transition probabilities of the driven oscillator.

    The coefficients of ``u^n v^m`` in ``sqrt(2) / sqrt(Q(1-u^2)(1-v^2) + (1+u^2)(1+v^2) - 4uv)``
    are the probabilities ``P[n -> m]``.  They are extracted with truncated
    series arithmetic; ``q_star = 1`` reproduces the identity exactly.
    """
    if not (math.isfinite(q_star) and q_star >= 1.0):
        raise ParameterError(f"harmonic adiabaticity must be >= 1, got {q_star!r}")
    if int(n_levels) != n_levels or n_levels < 2:
        raise ParameterError(f"n_levels must be an integer >= 2, got {n_levels!r}")
    coeffs = inv_sqrt(radicand_poly(q_star, scale=0.5), int(n_levels), even=True)
    worst = coeffs.min()
    if worst < -NEGATIVE_COEFF_TOL:
        raise NumericalInstabilityError(
            f"transition probability {worst:.3g} < 0 at N={n_levels}; "
            "rerun with higher working precision"
        )
    np.maximum(coeffs, 0.0, out=coeffs)
    return TransitionMatrix(coeffs, float(q_star))


def _lattice_distribution(cold, t_exp, hot, t_com, dq0, dqt):
    """Merge the quadruple sum into atoms keyed by ``(k - m, l - n)``."""
    a = cold[:, None] * t_exp
    b = hot[:, None] * t_com
    tails = np.cumsum(cold[::-1])[::-1]
    keep = np.flatnonzero(tails > _NEGLIGIBLE_ROW_MASS)
    cut = keep[-1] + 1 if keep.size else 1
    a[cut:] = 0.0
    grid = _kernels.lattice_joint(a, b)
    n = cold.shape[0]
    d1, d2 = np.nonzero(grid > 0)
    p = grid[d1, d2]
    d1 = d1 - (n - 1)
    d2 = d2 - (n - 1)
    q2 = dqt * d1
    w = -dqt * d1 + dq0 * d2 + 0.0
    order = np.lexsort((w, q2))
    return q2[order].astype(float), w[order].astype(float), p[order]


def build_joint_two_level(engine: TwoLevelEngine, baths):
    """All outcomes of one two-level cycle (at most nine distinct atoms)."""
    cold, hot = thermal_weights(engine, baths)
    u, v = engine.u, engine.v
    trans = np.array([[u, v], [v, u]])
    q2, w, p = _lattice_distribution(cold, trans, hot, trans, *engine.quanta)
    return JointDistribution(q2, w, p, 0.0, engine.quanta)


def build_joint_harmonic(engine: HarmonicEngine, baths, n_levels=None,
                         tail_tolerance=DEFAULT_TAIL_TOLERANCE):
    """Truncated joint distribution of the harmonic engine.

    ``tail_mass`` collects the Gibbs mass above the truncation together with
    the transition probability leaking out of the ``n_levels`` box.  With
    ``n_levels=None`` the level count starts from the Gibbs requirement and
    doubles until the tail is below ``tail_tolerance``.
    """
    adaptive = n_levels is None
    if adaptive:
        bmin = min(baths.beta_c * engine.omega0, baths.beta_h * engine.omega_tau)
        n_levels = gibbs_levels(bmin, min(DEFAULT_GIBBS_TAIL, tail_tolerance))
    while True:
        try:
            dist = _harmonic_once(engine, baths, n_levels, tail_tolerance)
        except TruncationError as exc:
            if not adaptive or 2 * n_levels > MAX_LEVELS:
                raise
            n_levels = max(2 * n_levels, exc.required_levels or 0)
            continue
        return dist


def _harmonic_once(engine, baths, n_levels, tail_tolerance):
    cold, hot = thermal_weights(engine, baths, n_levels, tail=tail_tolerance)
    trans = harmonic_transitions(engine.q_star, n_levels).entries
    rows = trans.sum(axis=1)
    kept = math.fsum((cold * rows).tolist()) * math.fsum((hot * rows).tolist())
    tail = max(0.0, 1.0 - kept)
    if tail > tail_tolerance:
        raise TruncationError(
            f"{n_levels} levels leave tail mass {tail:.3g} > {tail_tolerance:.3g}",
            achieved_tail=tail,
            required_levels=2 * n_levels,
        )
    q2, w, p = _lattice_distribution(cold, trans, hot, trans, *engine.quanta)
    tail = max(tail, 1.0 - math.fsum(p.tolist()))
    return JointDistribution(q2, w, p, tail, engine.quanta)


def build_joint_adiabatic_scale_invariant(engine: ScaleInvariantEngine, baths,
                                          tail_tolerance=DEFAULT_TAIL_TOLERANCE):
    """Adiabatic joint distribution; every atom lies on ``W = -(1 - eps^2) Q2``.

    Occupations are normalized over the given spectrum, which is therefore
    the model.  For an unbounded spectrum the last level's occupation must
    stay below ``tail_tolerance`` or the truncation is rejected.
    """
    e0, _ = engine.energies()
    cold, hot = thermal_weights(engine, baths)
    if not engine.bounded:
        edge = max(cold[-1], hot[-1])
        if edge > tail_tolerance:
            raise TruncationError(
                f"top level still carries weight {edge:.3g} > {tail_tolerance:.3g}",
                achieved_tail=edge,
                required_levels=2 * len(e0),
            )
    gaps = e0[None, :] - e0[:, None]  # [n, k] = E_k - E_n
    weight = cold[:, None] * hot[None, :]
    scale = float(np.max(np.abs(e0))) or 1.0
    keys = np.round(gaps / scale, 12)
    _, first, inverse = np.unique(keys.ravel(), return_index=True, return_inverse=True)
    p = np.bincount(inverse.ravel(), weights=weight.ravel())
    q2 = gaps.ravel()[first] / engine.eps_tau_sq
    w = -(1.0 - engine.eps_tau_sq) * q2 + 0.0
    mask = p > 0
    order = np.lexsort((w[mask], q2[mask]))
    return JointDistribution(q2[mask][order], w[mask][order], p[mask][order], 0.0,
                             engine.quanta)


def build_joint(engine, baths, n_levels=None, tail_tolerance=DEFAULT_TAIL_TOLERANCE):
    if isinstance(engine, TwoLevelEngine):
        return build_joint_two_level(engine, baths)
    if isinstance(engine, HarmonicEngine):
        return build_joint_harmonic(engine, baths, n_levels, tail_tolerance)
    if isinstance(engine, ScaleInvariantEngine):
        return build_joint_adiabatic_scale_invariant(engine, baths, tail_tolerance)
    raise ParameterError(f"unknown engine type {type(engine).__name__}")


def moments(dist: JointDistribution) -> MomentSummary:
    """Means, (co)variances and Pearson coefficient of ``(Q2, W)``.

    Weights are renormalized over the retained atoms.  The Pearson
    coefficient is ``None`` when either variance vanishes.
    """
    p = dist.p / dist.p.sum()
    mq = float(np.dot(p, dist.q2))
    mw = float(np.dot(p, dist.w))
    dq = dist.q2 - mq
    dw = dist.w - mw
    vq = float(np.dot(p, dq * dq))
    vw = float(np.dot(p, dw * dw))
    cov = float(np.dot(p, dq * dw))
    if vq > 0 and vw > 0:
        rho = max(-1.0, min(1.0, cov / math.sqrt(vq * vw)))
    else:
        rho = None
    eta = -mw / mq if mq != 0 else None
    return MomentSummary(mq, mw, vq, vw, cov, rho, eta)
