"""Working-medium models, bath pairs and thermal occupations.

Units: k = hbar = 1.  Two-level eigenvalues are ``-nu, +nu`` (gap ``2 nu``),
harmonic eigenvalues are ``omega (n + 1/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterError, TruncationError

__all__ = [
    "BathPair",
    "TwoLevelEngine",
    "HarmonicEngine",
    "ScaleInvariantEngine",
    "EngineModel",
    "tls_no_transition_prob",
    "thermal_weights",
    "macroscopic_efficiencies",
    "gibbs_levels",
    "DEFAULT_GIBBS_TAIL",
    "MIN_LEVELS",
]

DEFAULT_GIBBS_TAIL = 1e-12
MIN_LEVELS = 64


def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value) and value > 0):
        raise ParameterError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class BathPair:
    """Inverse temperatures of the cold and hot reservoirs."""

    beta_c: float
    beta_h: float

    def __post_init__(self):
        _positive("beta_c", self.beta_c)
        _positive("beta_h", self.beta_h)
        if not self.beta_c > self.beta_h:
            raise ParameterError(
                f"cold bath must be colder: beta_c={self.beta_c} <= beta_h={self.beta_h}"
            )

    @property
    def eta_carnot(self) -> float:
        return 1.0 - self.beta_h / self.beta_c


@dataclass(frozen=True)
class TwoLevelEngine:
    """Spin-1/2 Otto engine with half-gaps ``nu0 -> nu_tau`` and no-transition probability ``u``."""

    nu0: float
    nu_tau: float
    u: float

    def __post_init__(self):
        _positive("nu0", self.nu0)
        _positive("nu_tau", self.nu_tau)
        if not self.nu_tau > self.nu0:
            raise ParameterError("expansion must widen the gap: need nu_tau > nu0")
        if not (0.0 <= self.u <= 1.0):
            raise ParameterError(f"u must lie in [0, 1], got {self.u!r}")

    @classmethod
    def from_q_star(cls, nu0, nu_tau, q_star):
        if not (-1.0 <= q_star <= 1.0):
            raise ParameterError(f"two-level adiabaticity must lie in [-1, 1], got {q_star!r}")
        return cls(nu0, nu_tau, (q_star + 1.0) / 2.0)

    @classmethod
    def from_drive(cls, nu0, nu_tau, lambda1, lambda2, tau):
        return cls(nu0, nu_tau, tls_no_transition_prob(lambda1, lambda2, tau))

    @property
    def v(self) -> float:
        return 1.0 - self.u

    @property
    def q_star(self) -> float:
        return 2.0 * self.u - 1.0

    @property
    def eps_tau_sq(self) -> float:
        return self.nu0 / self.nu_tau

    @property
    def is_adiabatic(self) -> bool:
        return self.u == 1.0

    def energies(self):
        """Eigenvalues before and after the expansion, ground state first."""
        return np.array([-self.nu0, self.nu0]), np.array([-self.nu_tau, self.nu_tau])

    @property
    def quanta(self):
        """Level spacings (initial, expanded)."""
        return 2.0 * self.nu0, 2.0 * self.nu_tau


@dataclass(frozen=True)
class HarmonicEngine:
    """Harmonic Otto engine ``omega0 -> omega_tau`` with adiabaticity ``q_star >= 1``."""

    omega0: float
    omega_tau: float
    q_star: float

    def __post_init__(self):
        _positive("omega0", self.omega0)
        _positive("omega_tau", self.omega_tau)
        if not self.omega_tau > self.omega0:
            raise ParameterError("expansion must raise the frequency: need omega_tau > omega0")
        if not (math.isfinite(self.q_star) and self.q_star >= 1.0):
            raise ParameterError(f"harmonic adiabaticity must be >= 1, got {self.q_star!r}")

    @property
    def eps_tau_sq(self) -> float:
        return self.omega0 / self.omega_tau

    @property
    def is_adiabatic(self) -> bool:
        return self.q_star == 1.0

    def energies(self, n_levels):
        n = np.arange(n_levels) + 0.5
        return self.omega0 * n, self.omega_tau * n

    @property
    def quanta(self):
        return self.omega0, self.omega_tau


@dataclass(frozen=True)
class ScaleInvariantEngine:
    """Adiabatic engine whose spectrum is rescaled by ``1/eps_tau_sq`` on expansion.

    ``spectrum`` is a finite truncation of the bare eigenvalues.  Set
    ``bounded=True`` when the truncation *is* the whole Hilbert space (for
    example a two-level system); otherwise the spectrum is treated as the
    head of an unbounded one when deciding convergence of spectral sums.
    """

    spectrum: tuple
    eps_tau_sq: float
    bounded: bool = False

    def __post_init__(self):
        levels = tuple(float(e) for e in self.spectrum)
        object.__setattr__(self, "spectrum", levels)
        if len(levels) < 2:
            raise ParameterError("spectrum needs at least two levels")
        if not all(math.isfinite(e) for e in levels) or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ParameterError("spectrum must be finite and strictly increasing")
        if not (0.0 < self.eps_tau_sq < 1.0):
            raise ParameterError(f"eps_tau_sq must lie in (0, 1), got {self.eps_tau_sq!r}")

    @classmethod
    def harmonic(cls, omega0, omega_tau, n_levels):
        return cls(tuple(omega0 * (np.arange(n_levels) + 0.5)), omega0 / omega_tau)

    @classmethod
    def two_level(cls, nu0, nu_tau):
        return cls((-nu0, nu0), nu0 / nu_tau, bounded=True)

    @property
    def is_adiabatic(self) -> bool:
        return True

    def energies(self):
        e0 = np.asarray(self.spectrum)
        return e0, e0 / self.eps_tau_sq

    @property
    def quanta(self):
        gap = float(np.min(np.diff(self.spectrum)))
        return gap, gap / self.eps_tau_sq


EngineModel = Union[TwoLevelEngine, HarmonicEngine, ScaleInvariantEngine]


def tls_no_transition_prob(lambda1, lambda2, tau):
    """No-transition probability ``cos^2 I`` of the linearly ramped two-level drive.

    ``I`` is the time integral of the field amplitude, ``(lambda1 + lambda2) tau / 2``.
    """
    if not (math.isfinite(tau) and tau > 0):
        raise ParameterError(f"drive duration must be positive, got {tau!r}")
    if lambda1 < 0 or lambda2 < 0:
        raise ParameterError("field amplitudes must be non-negative")
    area = 0.5 * (lambda1 + lambda2) * tau
    return math.cos(area) ** 2


def _gibbs(energies, beta):
    logw = -beta * np.asarray(energies, dtype=float)
    return np.exp(logw - logsumexp(logw))


def gibbs_levels(beta_omega, tail=DEFAULT_GIBBS_TAIL, minimum=MIN_LEVELS):
    """Smallest level count whose geometric Gibbs tail ``exp(-beta omega N)`` is below ``tail``."""
    need = math.ceil(-math.log(tail) / beta_omega)
    return max(minimum, need)


def harmonic_gibbs(beta_omega, n_levels):
    """Untruncated-normalized geometric weights; they sum to ``1 - exp(-beta omega N)``."""
    n = np.arange(n_levels)
    return -math.expm1(-beta_omega) * np.exp(-beta_omega * n)


def thermal_weights(engine, baths, n_levels=None, tail=DEFAULT_GIBBS_TAIL):
    """Cold occupations of the initial levels and hot occupations of the expanded levels.

    For the harmonic engine the weights are normalized over the infinite
    ladder, so each vector sums to one minus its Gibbs tail.  A truncation
    that leaves a tail above ``tail`` raises :class:`TruncationError`.
    """
    if isinstance(engine, TwoLevelEngine):
        e0, et = engine.energies()
        return _gibbs(e0, baths.beta_c), _gibbs(et, baths.beta_h)
    if isinstance(engine, ScaleInvariantEngine):
        e0, et = engine.energies()
        return _gibbs(e0, baths.beta_c), _gibbs(et, baths.beta_h)
    if isinstance(engine, HarmonicEngine):
        bc = baths.beta_c * engine.omega0
        bh = baths.beta_h * engine.omega_tau
        if n_levels is None:
            n_levels = gibbs_levels(min(bc, bh), tail)
        worst = math.exp(-min(bc, bh) * n_levels)
        if worst > tail:
            raise TruncationError(
                f"{n_levels} levels leave a Gibbs tail of {worst:.3g} > {tail:.3g}",
                achieved_tail=worst,
                required_levels=gibbs_levels(min(bc, bh), tail, minimum=n_levels),
            )
        return harmonic_gibbs(bc, n_levels), harmonic_gibbs(bh, n_levels)
    raise ParameterError(f"unknown engine type {type(engine).__name__}")


def macroscopic_efficiencies(engine, baths):
    """Adiabatic Otto efficiency ``1 - eps_tau^2`` and Carnot efficiency ``1 - beta_h/beta_c``."""
    return 1.0 - engine.eps_tau_sq, baths.eta_carnot
