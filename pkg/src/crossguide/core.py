"""Physical constants, configuration types and config-file parsing.

All quantities are stored in strict SI units. The config file interface uses
the lab units the rest of the package is quoted in (uK for energies via kB,
mm for lengths, ms for times, rad for angles); conversion happens here and
nowhere else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

# CODATA values; kB and hbar are fixed, mass and g are config-overridable.
KB = 1.380649e-23          # J/K (exact)
HBAR = 1.054571817e-34     # J s
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg

# Mass-number mass 87 u. The precise isotope mass (1.44316e-25 kg) shifts the
# bound-level count of the default well by -6 levels; the reference results
# this package reproduces were produced with 87 u.
M_RB87 = 87 * ATOMIC_MASS_UNIT

DEFAULT_G = 9.81           # m/s^2


class ConfigError(ValueError):
    """Raised for missing, unparseable or out-of-range config entries."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


@dataclass(frozen=True)
class PhysicalConstants:
    """Atomic mass, gravity and the fundamental constants used throughout."""

    m: float = M_RB87      # kg
    g: float = DEFAULT_G   # m/s^2
    k_B: float = KB        # J/K
    hbar: float = HBAR     # J s

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f.name, f"must be a positive finite number, got {v!r}")
        if abs(self.m - M_RB87) > 0.01 * M_RB87:
            raise ConfigError("mass_kg", f"{self.m!r} is not within 1% of the 87Rb mass")

    def uK(self, energy_J: float) -> float:
        """Energy in J expressed in uK (E / kB * 1e6)."""
        return energy_J / self.k_B * 1e6


@dataclass(frozen=True)
class GuideConfig:
    """Geometry and depths of the two crossing dipole guides (SI units).

    U0, U1   depths of the vertical / oblique Gaussian wells, J
    w0, w1   1/e^2 beam waists, m
    gamma    crossing angle, rad
    z_c      crossing height, m (negative: below the release point)
    t0       switch-on time of the oblique guide, s
    z_p      probe height at which observables are evaluated, m
    """

    U0: float
    U1: float
    w0: float
    w1: float
    gamma: float
    z_c: float
    t0: float
    z_p: float

    def __post_init__(self):
        checks = [
            ("U0_uK", self.U0 > 0, "vertical depth must be > 0"),
            ("U1_uK", self.U1 >= 0, "oblique depth must be >= 0"),
            ("w0_mm", self.w0 > 0, "waist must be > 0"),
            ("w1_mm", self.w1 > 0, "waist must be > 0"),
            ("gamma_rad", 0 < self.gamma < math.pi / 2, "crossing angle must lie in (0, pi/2)"),
            ("zc_mm", self.z_c <= 0, "crossing height must be <= 0"),
            ("zp_mm", self.z_p < self.z_c, "probe must sit below the crossing"),
            ("t0_ms", self.t0 >= 0, "switch-on time must be >= 0"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(key, msg)


@dataclass(frozen=True)
class CloudConfig:
    """Thermal ensemble released from the trap: rms size and temperature."""

    sigma0: float  # m
    T0: float      # K

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ConfigError("sigma0_mm", "cloud size must be > 0")
        if not self.T0 > 0:
            raise ConfigError("T0_uK", "temperature must be > 0")


@dataclass(frozen=True)
class RunParams:
    """Numerical parameters: spatial grid, time step, averaging orders."""

    x_min: float = -1.0e-3   # m
    x_max: float = 2.0e-3    # m
    n_points: int = 2**16    # power of two
    dt: float = 40e-6        # s
    quad_order: int = 1      # Gauss-Hermite order per (z0, zdot0) axis
    ladder_step: int = 200   # v0 decimation of the vibrational ladder

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ConfigError("xmax_mm", "grid must have x_max > x_min")
        n = self.n_points
        if n < 8 or (n & (n - 1)) != 0:
            raise ConfigError("n_points", f"must be a power of two >= 8, got {n}")
        if not self.dt > 0:
            raise ConfigError("dt_ms", "time step must be > 0")
        if self.quad_order < 1:
            raise ConfigError("quad_order", "must be >= 1")
        if self.ladder_step < 1:
            raise ConfigError("ladder_step", "must be >= 1")


# Config file keys, their target (dataclass, field) and the unit conversion
# applied on load. Inverse conversions are used when writing a file back.
_KEY_TABLE = {
    "U0_uK":      ("guide", "U0",      lambda v: v * 1e-6 * KB),
    "U1_uK":      ("guide", "U1",      lambda v: v * 1e-6 * KB),
    "w0_mm":      ("guide", "w0",      lambda v: v * 1e-3),
    "w1_mm":      ("guide", "w1",      lambda v: v * 1e-3),
    "gamma_rad":  ("guide", "gamma",   lambda v: v),
    "zc_mm":      ("guide", "z_c",     lambda v: v * 1e-3),
    "t0_ms":      ("guide", "t0",      lambda v: v * 1e-3),
    "zp_mm":      ("guide", "z_p",     lambda v: v * 1e-3),
    "sigma0_mm":  ("cloud", "sigma0",  lambda v: v * 1e-3),
    "T0_uK":      ("cloud", "T0",      lambda v: v * 1e-6),
    "mass_kg":    ("consts", "m",      lambda v: v),
    "g_ms2":      ("consts", "g",      lambda v: v),
    "xmin_mm":    ("run", "x_min",     lambda v: v * 1e-3),
    "xmax_mm":    ("run", "x_max",     lambda v: v * 1e-3),
    "n_points":   ("run", "n_points",  lambda v: int(v)),
    "dt_ms":      ("run", "dt",        lambda v: v * 1e-3),
    "quad_order": ("run", "quad_order", lambda v: int(v)),
    "ladder_step": ("run", "ladder_step", lambda v: int(v)),
}

_INVERSE = {
    "U0_uK": lambda v: v / KB * 1e6,
    "U1_uK": lambda v: v / KB * 1e6,
    "w0_mm": lambda v: v * 1e3,
    "w1_mm": lambda v: v * 1e3,
    "gamma_rad": lambda v: v,
    "zc_mm": lambda v: v * 1e3,
    "t0_ms": lambda v: v * 1e3,
    "zp_mm": lambda v: v * 1e3,
    "sigma0_mm": lambda v: v * 1e3,
    "T0_uK": lambda v: v * 1e6,
    "mass_kg": lambda v: v,
    "g_ms2": lambda v: v,
    "xmin_mm": lambda v: v * 1e3,
    "xmax_mm": lambda v: v * 1e3,
    "n_points": lambda v: v,
    "dt_ms": lambda v: v * 1e3,
    "quad_order": lambda v: v,
    "ladder_step": lambda v: v,
}

_REQUIRED = {k for k, (sect, _, _) in _KEY_TABLE.items() if sect in ("guide", "cloud")}

Config = tuple[PhysicalConstants, GuideConfig, CloudConfig, RunParams]


def parse_config_text(text: str, source: str = "<string>") -> Config:
    """Parse the flat ``key = value`` format with ``#`` comments."""
    raw: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"{source}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _KEY_TABLE:
            raise ConfigError(key, f"{source}:{lineno}: unknown key")
        try:
            raw[key] = float(val.strip())
        except ValueError:
            raise ConfigError(key, f"{source}:{lineno}: unparseable value {val.strip()!r}") from None

    missing = _REQUIRED - raw.keys()
    if missing:
        raise ConfigError(sorted(missing)[0], "missing required key")

    sections: dict[str, dict[str, float | int]] = {"guide": {}, "cloud": {}, "consts": {}, "run": {}}
    for key, value in raw.items():
        section, field, conv = _KEY_TABLE[key]
        sections[section][field] = conv(value)

    consts = PhysicalConstants(**sections["consts"])
    guide = GuideConfig(**sections["guide"])
    cloud = CloudConfig(**sections["cloud"])
    run = RunParams(**sections["run"])
    return consts, guide, cloud, run


def load_config(path: str | Path) -> Config:
    """Load and validate a config file; returns SI-valued objects."""
    path = Path(path)
    return parse_config_text(path.read_text(), source=str(path))


def dump_config(config: Config) -> str:
    """Serialize a config back to the file format (round-trips exactly)."""
    consts, guide, cloud, run = config
    values = {
        "U0_uK": guide.U0, "U1_uK": guide.U1, "w0_mm": guide.w0, "w1_mm": guide.w1,
        "gamma_rad": guide.gamma, "zc_mm": guide.z_c, "t0_ms": guide.t0, "zp_mm": guide.z_p,
        "sigma0_mm": cloud.sigma0, "T0_uK": cloud.T0,
        "mass_kg": consts.m, "g_ms2": consts.g,
        "xmin_mm": run.x_min, "xmax_mm": run.x_max, "n_points": run.n_points,
        "dt_ms": run.dt, "quad_order": run.quad_order, "ladder_step": run.ladder_step,
    }
    lines = []
    for key in _KEY_TABLE:
        v = _INVERSE[key](values[key])
        lines.append(f"{key} = {v:d}" if isinstance(v, int) else f"{key} = {v!r}")
    return "\n".join(lines) + "\n"


def default_config() -> Config:
    """The canonical configuration shipped with the package."""
    with resources.files("crossguide.data").joinpath("default.cfg").open() as f:
        return parse_config_text(f.read(), source="default.cfg")


def with_overrides(config: Config, **kwargs) -> Config:
    """Return a config with dataclass fields replaced, e.g. U1=..., n_points=...

    Field names follow the dataclasses (SI values), not the file keys.
    """
    parts = list(config)
    for name, value in kwargs.items():
        for i, part in enumerate(parts):
            if name in {f.name for f in fields(part)}:
                parts[i] = replace(part, **{name: value})
                break
        else:
            raise KeyError(f"unknown config field {name!r}")
    return tuple(parts)  # type: ignore[return-value]
