"""Simulation parameters, unit parsing, and config file I/O.

The config file is flat key-value text split into the sections
``[dot] [pulse] [bath] [numerics] [scan] [output]``.  Values carry optional
SI unit suffixes (``0.4meV``, ``12.3ns``, ``2T``, ``0.02Hz``) and angles
accept a ``pi`` suffix (``0.3pi``).  Any key can be overridden on the
command line with ``--set section.key=value``.
"""

from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass, field, fields, replace

from .constants import ARCSECH_INV_SQRT2, HBAR_EV_S, HBAR_J_S, MU_B_J_T
from .errors import ConfigError, NonpositiveFrequencyError

# ---------------------------------------------------------------------------
# quantity parsing

_SI_PREFIX = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "μ": 1e-6,
    "m": 1e-3, "": 1.0, "k": 1e3, "M": 1e6, "G": 1e9, "T": 1e12,
}

# base unit -> (dimension, scale to internal unit)
_BASE_UNITS = {
    "eV": ("energy", 1.0),        # internal energies are eV
    "s": ("time", 1.0),
    "T": ("field", 1.0),
    "Hz": ("rate", 1.0),
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180.0),
    "pi": ("angle", math.pi),
}

_QUANTITY_RE = re.compile(
    r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([A-Za-zµμ]*)\s*$"
)


def _split_unit(token: str):
    """Resolve a unit token into (dimension, scale), longest base unit first."""
    for base, (dim, base_scale) in sorted(
        _BASE_UNITS.items(), key=lambda kv: -len(kv[0])
    ):
        if token.endswith(base):
            prefix = token[: -len(base)]
            if prefix in _SI_PREFIX:
                # bare "T" must stay tesla, not the tera prefix of nothing
                return dim, _SI_PREFIX[prefix] * base_scale
    return None


def parse_quantity(text: str, dimension: str, key: str = "value") -> float:
    """Parse ``text`` as a number with an optional unit of ``dimension``.

    Returns the value in internal units (eV, s, T, Hz, rad).  Plain numbers
    are accepted for any dimension and taken as already-internal units.
    """
    m = _QUANTITY_RE.match(text)
    if not m:
        raise ConfigError(f"{key}: cannot parse quantity {text!r}")
    value = float(m.group(1))
    token = m.group(2)
    if not token:
        return value
    resolved = _split_unit(token)
    if resolved is None:
        raise ConfigError(f"{key}: unknown unit {token!r} in {text!r}")
    dim, scale = resolved
    if dim != dimension and not (dimension == "dimensionless" and dim is None):
        raise ConfigError(
            f"{key}: unit {token!r} is {dim}, expected {dimension}"
        )
    return value * scale


# ---------------------------------------------------------------------------
# parameter blocks


@dataclass(frozen=True)
class DotParams:
    """Quantum dot and pulse-train parameters.

    g_factor     dimensionless electron g-factor
    B_field      applied field in tesla (Voigt geometry, along x)
    T2_electron  electron coherence time between pulses, seconds
    T_R          pulse repetition period, seconds
    """

    g_factor: float = 0.43
    B_field: float = 2.0
    T2_electron: float = 100e-9
    T_R: float = 12.3e-9

    def validate(self, errors: list[str]) -> None:
        if not self.g_factor > 0:
            errors.append("dot.g_factor: must be > 0")
        if self.B_field < 0:
            errors.append("dot.B_field: must be >= 0")
        if not self.T2_electron > 0:
            errors.append("dot.T2_electron: must be > 0")
        if not self.T_R > 0:
            errors.append("dot.T_R: must be > 0")


@dataclass(frozen=True)
class PulseParams:
    """One pulse of the periodic train.

    area            pulse area in radians, defined on a single z-basis
                    (circular) transition
    bandwidth_fwhm  spectral intensity FWHM of the field, eV
    detuning        pump energy minus the mean transition energy, eV
    retardance      Soleil-Babinet retardance in radians; pi/2 is circular,
                    0 or pi linear
    helicity_sign   +1 or -1, selects the dominant circular component
    """

    area: float = math.pi
    bandwidth_fwhm: float = 0.7e-3
    detuning: float = 0.0
    retardance: float = math.pi / 2
    helicity_sign: int = 1

    def validate(self, errors: list[str]) -> None:
        if self.area < 0:
            errors.append("pulse.area: must be >= 0")
        if not self.bandwidth_fwhm > 0:
            errors.append("pulse.bandwidth_fwhm: must be > 0")
        if not 0 <= self.retardance <= math.pi:
            errors.append("pulse.retardance: must lie in [0, pi]")
        if self.helicity_sign not in (1, -1):
            errors.append("pulse.helicity_sign: must be +1 or -1")


@dataclass(frozen=True)
class BathParams:
    """Nuclear spin bath parameters.

    A_hyperfine  hyperfine constant, eV (full polarization shifts the
                 electron Zeeman energy by exactly A)
    N_nuclei     number of spin-1/2 nuclei coupled to the electron
    gamma_depol  background per-nucleus depolarization rate, 1/s
    n_window     polarization grid truncation, |n| <= n_window
    """

    A_hyperfine: float = 100e-6
    N_nuclei: int = 20000
    gamma_depol: float = 2e-2
    n_window: float = 0.3

    def validate(self, errors: list[str]) -> None:
        if not self.A_hyperfine > 0:
            errors.append("bath.A_hyperfine: must be > 0")
        if self.N_nuclei < 2:
            errors.append("bath.N_nuclei: must be >= 2")
        if self.gamma_depol < 0:
            errors.append("bath.gamma_depol: must be >= 0")
        if not 0 < self.n_window <= 1:
            errors.append("bath.n_window: must lie in (0, 1]")


@dataclass(frozen=True)
class NumericsParams:
    """Integration and grid controls.

    window_tau_mult     pulse integration window, +-window_tau_mult * tau
    refine_tol          max-norm agreement required between step refinements
    unitarity_tol       accepted deviation of U†U from identity
    initial_steps       starting step count (0 = automatic from phase span)
    max_steps           hard cap on the refined step count
    cache_points_per_psc  propagator cache density per PSC interval
    drift_points_per_psc  sampling density of the fine drift curve
    omega_min           positive guard on the precession frequency, rad/s
    evolve_safety       fraction of the explicit-step stability bound used
                        when choosing a default evolution step
    """

    window_tau_mult: float = 16.0
    refine_tol: float = 1e-9
    unitarity_tol: float = 1e-9
    initial_steps: int = 0
    max_steps: int = 1 << 17
    cache_points_per_psc: int = 8
    drift_points_per_psc: int = 50
    omega_min: float = 2 * math.pi * 0.1e9
    evolve_safety: float = 0.4

    def validate(self, errors: list[str]) -> None:
        for name in (
            "window_tau_mult", "refine_tol", "unitarity_tol", "omega_min",
            "evolve_safety",
        ):
            if not getattr(self, name) > 0:
                errors.append(f"numerics.{name}: must be > 0")
        for name in ("max_steps", "cache_points_per_psc", "drift_points_per_psc"):
            if getattr(self, name) < 1:
                errors.append(f"numerics.{name}: must be >= 1")
        if self.initial_steps < 0:
            errors.append("numerics.initial_steps: must be >= 0")


_SCAN_AXES = ("none", "detuning", "area", "B_field", "retardance")


@dataclass(frozen=True)
class ScanSpec:
    """Parameter sweep request: one axis and its value list (internal units)."""

    axis: str = "none"
    values: tuple[float, ...] = ()

    def validate(self, errors: list[str]) -> None:
        if self.axis not in _SCAN_AXES:
            errors.append(
                f"scan.axis: {self.axis!r} not one of {', '.join(_SCAN_AXES)}"
            )
        if self.axis == "none" and self.values:
            errors.append("scan.values: given without a scan axis")
        if self.axis != "none" and not self.values:
            errors.append("scan.values: empty for axis " + self.axis)


@dataclass(frozen=True)
class OutputSpec:
    """Output location and format tag."""

    directory: str = "out"
    format: str = "csv"
    dump_distributions: bool = False

    def validate(self, errors: list[str]) -> None:
        if self.format != "csv":
            errors.append(f"output.format: unsupported {self.format!r}")


@dataclass(frozen=True)
class SimulationConfig:
    dot: DotParams = field(default_factory=DotParams)
    pulse: PulseParams = field(default_factory=PulseParams)
    bath: BathParams = field(default_factory=BathParams)
    numerics: NumericsParams = field(default_factory=NumericsParams)
    scan: ScanSpec = field(default_factory=ScanSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def validate(self) -> None:
        errors: list[str] = []
        for block in (self.dot, self.pulse, self.bath, self.numerics,
                      self.scan, self.output):
            block.validate(errors)
        if errors:
            raise ConfigError("; ".join(errors))


# ---------------------------------------------------------------------------
# field dimension map used by the parser and the serializer

_FIELD_DIMS = {
    ("dot", "g_factor"): "dimensionless",
    ("dot", "B_field"): "field",
    ("dot", "T2_electron"): "time",
    ("dot", "T_R"): "time",
    ("pulse", "area"): "angle",
    ("pulse", "bandwidth_fwhm"): "energy",
    ("pulse", "detuning"): "energy",
    ("pulse", "retardance"): "angle",
    ("pulse", "helicity_sign"): "int",
    ("bath", "A_hyperfine"): "energy",
    ("bath", "N_nuclei"): "int",
    ("bath", "gamma_depol"): "rate",
    ("bath", "n_window"): "dimensionless",
    ("numerics", "window_tau_mult"): "dimensionless",
    ("numerics", "refine_tol"): "dimensionless",
    ("numerics", "unitarity_tol"): "dimensionless",
    ("numerics", "initial_steps"): "int",
    ("numerics", "max_steps"): "int",
    ("numerics", "cache_points_per_psc"): "int",
    ("numerics", "drift_points_per_psc"): "int",
    ("numerics", "omega_min"): "angular",
    ("numerics", "evolve_safety"): "dimensionless",
    ("output", "directory"): "str",
    ("output", "format"): "str",
    ("output", "dump_distributions"): "bool",
}

_SCAN_DIM_BY_AXIS = {
    "detuning": "energy",
    "area": "angle",
    "B_field": "field",
    "retardance": "angle",
}

_BLOCK_TYPES = {
    "dot": DotParams,
    "pulse": PulseParams,
    "bath": BathParams,
    "numerics": NumericsParams,
    "output": OutputSpec,
}


def _parse_field(section: str, key: str, raw: str):
    dim = _FIELD_DIMS.get((section, key))
    if dim is None:
        raise ConfigError(f"{section}.{key}: unknown key")
    label = f"{section}.{key}"
    if dim == "str":
        return raw.strip()
    if dim == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{label}: expected a boolean, got {raw!r}")
    if dim == "int":
        value = parse_quantity(raw, "dimensionless", label)
        if abs(value - round(value)) > 1e-9:
            raise ConfigError(f"{label}: expected an integer, got {raw!r}")
        return int(round(value))
    if dim == "angular":
        # accept either rad/s (bare) or an ordinary frequency with unit
        m = _QUANTITY_RE.match(raw)
        if m and m.group(2):
            return 2 * math.pi * parse_quantity(raw, "rate", label)
        return parse_quantity(raw, "dimensionless", label)
    if dim == "dimensionless":
        return parse_quantity(raw, "dimensionless", label)
    return parse_quantity(raw, dim, label)


def parse_scan_values(text: str, axis: str) -> tuple[float, ...]:
    """Parse scan values: a comma list and/or ``start:stop:step`` ranges.

    Range endpoints are inclusive; each element may carry a unit suffix.
    """
    dim = _SCAN_DIM_BY_AXIS.get(axis, "dimensionless")
    out: list[float] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if ":" in part:
            pieces = part.split(":")
            if len(pieces) != 3:
                raise ConfigError(
                    f"scan.values: range {part!r} is not start:stop:step"
                )
            start, stop, step = (
                parse_quantity(p, dim, "scan.values") for p in pieces
            )
            if step == 0:
                raise ConfigError("scan.values: zero step")
            count = int(round((stop - start) / step))
            if count < 0:
                raise ConfigError(f"scan.values: empty range {part!r}")
            if abs(start + count * step - stop) > 1e-9 * max(abs(step), 1e-300):
                raise ConfigError(
                    f"scan.values: step does not divide range {part!r}"
                )
            out.extend(start + k * step for k in range(count + 1))
        else:
            out.append(parse_quantity(part, dim, "scan.values"))
    return tuple(out)


def _apply_kv(blocks: dict, section: str, key: str, raw: str) -> None:
    if section == "scan":
        if key == "axis":
            blocks["scan"]["axis"] = raw.strip()
        elif key == "values":
            blocks["scan"]["values"] = raw.strip()
        else:
            raise ConfigError(f"scan.{key}: unknown key")
        return
    if section not in _BLOCK_TYPES:
        raise ConfigError(f"[{section}]: unknown section")
    blocks[section][key] = _parse_field(section, key, raw)


def _build_config(blocks: dict) -> SimulationConfig:
    axis = blocks["scan"].get("axis", "none")
    raw_values = blocks["scan"].get("values", "")
    if axis != "none" and axis not in _SCAN_DIM_BY_AXIS:
        raise ConfigError(
            f"scan.axis: {axis!r} not one of {', '.join(_SCAN_AXES)}"
        )
    values = parse_scan_values(raw_values, axis) if raw_values else ()
    cfg = SimulationConfig(
        dot=DotParams(**blocks["dot"]),
        pulse=PulseParams(**blocks["pulse"]),
        bath=BathParams(**blocks["bath"]),
        numerics=NumericsParams(**blocks["numerics"]),
        scan=ScanSpec(axis=axis, values=values),
        output=OutputSpec(**blocks["output"]),
    )
    cfg.validate()
    return cfg


def load_config(path: str, overrides: tuple[str, ...] = ()) -> SimulationConfig:
    """Load and validate a config file, applying ``--set`` style overrides.

    Raises ``ConfigError`` naming the offending key for missing files,
    syntax errors, unknown keys, and invariant violations.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None

    blocks = {name: {} for name in (*_BLOCK_TYPES, "scan")}
    for section in parser.sections():
        for key, raw in parser.items(section):
            _apply_kv(blocks, section, key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not section.key=value")
        dotted, raw = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override {item!r} is not section.key=value")
        section, key = dotted.split(".", 1)
        _apply_kv(blocks, section.strip(), key.strip(), raw)
    return _build_config(blocks)


def default_config() -> SimulationConfig:
    cfg = SimulationConfig()
    cfg.validate()
    return cfg


def dump_config(cfg: SimulationConfig) -> str:
    """Serialize a config to file text; ``load`` of the result round-trips."""
    buf = io.StringIO()
    for section, block in (
        ("dot", cfg.dot), ("pulse", cfg.pulse), ("bath", cfg.bath),
        ("numerics", cfg.numerics), ("output", cfg.output),
    ):
        buf.write(f"[{section}]\n")
        for f in fields(block):
            value = getattr(block, f.name)
            if isinstance(value, bool):
                buf.write(f"{f.name} = {'true' if value else 'false'}\n")
            else:
                buf.write(f"{f.name} = {value}\n")
        buf.write("\n")
    buf.write("[scan]\n")
    buf.write(f"axis = {cfg.scan.axis}\n")
    if cfg.scan.values:
        buf.write("values = " + ", ".join(repr(v) for v in cfg.scan.values) + "\n")
    return buf.getvalue()


def with_scan_value(cfg: SimulationConfig, axis: str, value: float) -> SimulationConfig:
    """Return a copy of ``cfg`` with one scanned parameter replaced."""
    if axis == "detuning":
        return replace(cfg, pulse=replace(cfg.pulse, detuning=value))
    if axis == "area":
        return replace(cfg, pulse=replace(cfg.pulse, area=value))
    if axis == "B_field":
        return replace(cfg, dot=replace(cfg.dot, B_field=value))
    if axis == "retardance":
        return replace(cfg, pulse=replace(cfg.pulse, retardance=value))
    raise ConfigError(f"scan.axis: cannot apply value to {axis!r}")


# ---------------------------------------------------------------------------
# derived quantities


def pulse_duration_from_bandwidth(bandwidth_fwhm: float) -> float:
    """Sech time constant tau for a given spectral intensity FWHM (eV).

    The field envelope is sech(t/tau); its spectral intensity FWHM equals
    ``bandwidth_fwhm`` when tau = (4 arcsech(2^-1/2)/pi) hbar / FWHM.  The
    temporal intensity FWHM is then 2 arcsech(2^-1/2) tau ~ 1.763 tau.
    """
    if not bandwidth_fwhm > 0:
        raise ConfigError("pulse.bandwidth_fwhm: must be > 0")
    return 4.0 * ARCSECH_INV_SQRT2 / math.pi * HBAR_EV_S / bandwidth_fwhm


def zeeman_frequency(dot: DotParams) -> float:
    """Bare electron precession frequency g mu_B B / hbar in rad/s."""
    return dot.g_factor * MU_B_J_T * dot.B_field / HBAR_J_S


def precession_frequency(
    n: float, dot: DotParams, bath: BathParams, omega_min: float = 2 * math.pi * 0.1e9
):
    """Precession frequency at nuclear polarization ``n``: w0 + n A / hbar.

    Raises ``NonpositiveFrequencyError`` when the result does not clear the
    positive guard ``omega_min`` (the n window is too wide for this field).
    Accepts scalar or ndarray ``n``.
    """
    import numpy as np

    omega = zeeman_frequency(dot) + np.asarray(n) * bath.A_hyperfine / HBAR_EV_S
    if np.min(omega) <= omega_min:
        raise NonpositiveFrequencyError(
            f"precession frequency {np.min(omega):.3e} rad/s at n="
            f"{np.asarray(n).ravel()[np.argmin(omega)]:.4g} is below the "
            f"guard {omega_min:.3e} rad/s; narrow bath.n_window or raise the field"
        )
    return omega if np.ndim(n) else float(omega)
