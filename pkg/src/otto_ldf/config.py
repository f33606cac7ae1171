"""Run configuration: a flat sectioned key-value file plus command-line overrides.

Format::

    # comment
    [baths]
    beta_c = 3
    beta_h = 0.1

Every key belongs to a known section and is type-checked on load; errors
name the offending line and field.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields, replace

from .engines import BathPair, HarmonicEngine, TwoLevelEngine
from .errors import ConfigError, OttoError

__all__ = ["RunConfig", "load_config", "parse_config", "apply_overrides", "SECTIONS"]

ENGINES = ("two_level", "harmonic", "both")
REGIMES = ("exact", "linear", "adiabatic")


@dataclass(frozen=True)
class RunConfig:
    # [baths]
    beta_c: float = 3.0
    beta_h: float = 0.1
    # [two_level]
    nu0: float = 1.0
    nu_tau: float = 2.0
    q_star_tl: float = 0.9
    # [harmonic]
    omega0: float = 1.0
    omega_tau: float = 2.0
    q_star_ho: float = 1.2
    n_levels: int = 0  # 0 selects the level count adaptively
    # [run]
    engine: str = "both"
    regime: str = "exact"
    tolerance: float = 1e-8
    tail_tolerance: float = 1e-10
    seed: int = 0
    threads: int = 1
    output: str = ""
    # [pearson]
    tl_q_min: float = 0.0
    tl_q_max: float = 1.0
    ho_q_min: float = 1.0
    ho_q_max: float = 1.5
    q_points: int = 21
    # [ldf]
    eta_min: float = -0.5
    eta_max: float = 1.5
    eta_points: int = 201
    gamma_max: float = 50.0
    j_max: float = 1e3
    # [contour]
    gamma1_min: float = -2.0
    gamma1_max: float = 2.0
    gamma2_min: float = -2.0
    gamma2_max: float = 2.0
    gamma1_points: int = 101
    gamma2_points: int = 101
    # [sample]
    s: int = 20
    n_blocks: int = 100000
    bins: int = 101

    def validate(self):
        """Raise :class:`ConfigError` on any invalid combination."""
        _check(self.engine in ENGINES, "engine", f"must be one of {', '.join(ENGINES)}")
        _check(self.regime in REGIMES, "regime", f"must be one of {', '.join(REGIMES)}")
        for name in ("tolerance", "tail_tolerance", "gamma_max", "j_max"):
            _check(getattr(self, name) > 0, name, "must be positive")
        for name in ("q_points", "eta_points", "s", "n_blocks", "bins", "threads"):
            _check(getattr(self, name) >= 1, name, "must be at least 1")
        _check(self.n_levels == 0 or self.n_levels >= 2, "n_levels", "must be 0 (adaptive) or >= 2")
        _check(self.tl_q_min <= self.tl_q_max, "tl_q_max", "sweep range is reversed")
        _check(self.ho_q_min <= self.ho_q_max, "ho_q_max", "sweep range is reversed")
        _check(self.eta_min < self.eta_max or self.eta_points == 1, "eta_max", "grid is not increasing")
        _check(self.gamma1_min < self.gamma1_max, "gamma1_max", "contour window has zero area")
        _check(self.gamma2_min < self.gamma2_max, "gamma2_max", "contour window has zero area")
        _check(self.gamma1_points >= 2 and self.gamma2_points >= 2, "gamma1_points",
               "contour resolution must be at least 2")
        _check(-1.0 <= self.tl_q_min and self.tl_q_max <= 1.0, "tl_q_min",
               "two-level adiabaticity must lie in [-1, 1]")
        _check(self.ho_q_min >= 1.0, "ho_q_min", "harmonic adiabaticity must be >= 1")
        try:
            self.baths()
            self.two_level()
            self.harmonic()
        except OttoError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def baths(self) -> BathPair:
        return BathPair(self.beta_c, self.beta_h)

    def two_level(self, q_star=None) -> TwoLevelEngine:
        q = self.q_star_tl if q_star is None else q_star
        if self.regime == "adiabatic" and q_star is None:
            q = 1.0
        return TwoLevelEngine.from_q_star(self.nu0, self.nu_tau, q)

    def harmonic(self, q_star=None) -> HarmonicEngine:
        q = self.q_star_ho if q_star is None else q_star
        if self.regime == "adiabatic" and q_star is None:
            q = 1.0
        return HarmonicEngine(self.omega0, self.omega_tau, q)

    def engines(self):
        """``(name, engine)`` pairs selected by ``engine``."""
        names = ("two_level", "harmonic") if self.engine == "both" else (self.engine,)
        return [(n, self.two_level() if n == "two_level" else self.harmonic()) for n in names]

    def output_dir(self) -> str:
        return self.output or os.environ.get("OTTO_LDF_OUTPUT", "") or "otto_ldf_output"

    def to_dict(self):
        return asdict(self)


def _check(ok, name, message, line=None):
    if not ok:
        raise ConfigError(message, line=line, field=name)


SECTIONS = {
    "baths": ("beta_c", "beta_h"),
    "two_level": ("nu0", "nu_tau", "q_star_tl"),
    "harmonic": ("omega0", "omega_tau", "q_star_ho", "n_levels"),
    "run": ("engine", "regime", "tolerance", "tail_tolerance", "seed", "threads", "output"),
    "pearson": ("tl_q_min", "tl_q_max", "ho_q_min", "ho_q_max", "q_points"),
    "ldf": ("eta_min", "eta_max", "eta_points", "gamma_max", "j_max"),
    "contour": ("gamma1_min", "gamma1_max", "gamma2_min", "gamma2_max",
                "gamma1_points", "gamma2_points"),
    "sample": ("s", "n_blocks", "bins"),
}
# short keys accepted inside their section
ALIASES = {("two_level", "q_star"): "q_star_tl", ("harmonic", "q_star"): "q_star_ho"}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, text, line=None):
    kind = _TYPES[name]
    try:
        if kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if kind == "int":
            return int(text)
        return text
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as {kind}", line=line, field=name) from None


def _resolve(section, key, line=None):
    if section not in SECTIONS:
        raise ConfigError(f"unknown section [{section}]", line=line)
    name = ALIASES.get((section, key), key)
    if name not in SECTIONS[section]:
        raise ConfigError(f"unknown key in section [{section}]", line=line, field=key)
    return name


def parse_config(text, base=None) -> RunConfig:
    """Parse config text on top of ``base`` (defaults when omitted)."""
    values = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", line=lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        if section is None:
            raise ConfigError("key outside of any section", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        name = _resolve(section, key, lineno)
        if name in values:
            raise ConfigError("duplicate key", line=lineno, field=key)
        values[name] = _coerce(name, value, lineno)
    cfg = replace(base or RunConfig(), **values)
    return cfg


def load_config(path, base=None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config(text, base)


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply ``section.key=value`` strings."""
    values = {}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        name = _resolve(section, key.strip())
        values[name] = _coerce(name, value.strip())
    return replace(cfg, **values)
