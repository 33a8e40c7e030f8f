"""Physical constants, configuration types and the YAML config loader.

All quantities are SI inside the code. Units appear only in config key
names (``f_m_hz``, ``modal_mass_kg`` ...).

Detuning convention, used everywhere in the package: ``detuning`` is the
laser frequency minus the cavity resonance frequency, in units of the
cavity half linewidth (HWHM). Positive detuning (laser blue of the
cavity) produces a positive, restoring optical spring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy.constants
import yaml

SCHEMA_VERSION = 1

DAMPING_LAWS = ("structural", "viscous")


class ConfigError(ValueError):
    """Raised when a config file is malformed or violates an invariant."""


@dataclass(frozen=True)
class PhysicalConstants:
    k_B: float = scipy.constants.k
    hbar: float = scipy.constants.hbar
    c: float = scipy.constants.c


CONST = PhysicalConstants()


@dataclass(frozen=True)
class MechanicalMode:
    """One mechanical resonance as seen at the beam spot.

    ``uncertain`` marks placeholder values that are not measured.
    """

    name: str
    f_m: float
    Q: float
    modal_mass: float
    damping: str = "structural"
    uncertain: bool = False

    def __post_init__(self):
        if not self.f_m > 0:
            raise ConfigError(f"mode {self.name!r}: f_m must be > 0 (got {self.f_m})")
        if not self.Q > 0:
            raise ConfigError(f"mode {self.name!r}: Q must be > 0 (got {self.Q})")
        if not self.modal_mass > 0:
            raise ConfigError(f"mode {self.name!r}: modal_mass must be > 0 (got {self.modal_mass})")
        if self.damping not in DAMPING_LAWS:
            raise ConfigError(f"mode {self.name!r}: unknown damping law {self.damping!r}")

    @property
    def omega_m(self) -> float:
        return 2 * math.pi * self.f_m


@dataclass(frozen=True)
class MechanicalModel:
    modes: tuple[MechanicalMode, ...]
    coupling_scale: tuple[float, ...] = ()

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        if not modes:
            raise ConfigError("mechanical model needs at least one mode")
        scale = tuple(float(s) for s in self.coupling_scale) or (1.0,) * len(modes)
        if len(scale) != len(modes):
            raise ConfigError("coupling_scale must have one entry per mode")
        for mode, s in zip(modes, scale):
            if not s >= 0:
                raise ConfigError(f"mode {mode.name!r}: coupling_scale must be >= 0 (got {s})")
        object.__setattr__(self, "coupling_scale", scale)

    @property
    def fundamental(self) -> MechanicalMode:
        return self.modes[0]

    def with_scale(self, name: str, scale: float) -> MechanicalModel:
        names = [m.name for m in self.modes]
        i = names.index(name)
        new = list(self.coupling_scale)
        new[i] = scale
        return MechanicalModel(self.modes, tuple(new))


@dataclass(frozen=True)
class CavityConfig:
    """Two-mirror cavity. The input coupler is the moving mirror."""

    length: float
    wavelength: float
    T_in: float
    T_end: float
    loss_rt: float
    temperature: float = 295.0

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigError(f"length must be > 0 (got {self.length})")
        if not self.wavelength > 0:
            raise ConfigError(f"wavelength must be > 0 (got {self.wavelength})")
        if not 0 < self.T_in < 1:
            raise ConfigError(f"T_in must satisfy 0 < T_in < 1 (got {self.T_in})")
        # T_end = 0 and loss_rt = 0 are allowed so lossless limits can be built
        if not 0 <= self.T_end < 1:
            raise ConfigError(f"T_end must satisfy 0 <= T_end < 1 (got {self.T_end})")
        if not 0 <= self.loss_rt < 1:
            raise ConfigError(f"loss_rt must satisfy 0 <= loss_rt < 1 (got {self.loss_rt})")
        if not self.total_loss < 1:
            raise ConfigError("T_in + T_end + loss_rt must be < 1")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be > 0 (got {self.temperature})")

    @property
    def total_loss(self) -> float:
        return self.T_in + self.T_end + self.loss_rt

    @property
    def finesse(self) -> float:
        return 2 * math.pi / self.total_loss

    @property
    def fsr(self) -> float:
        return CONST.c / (2 * self.length)

    @property
    def linewidth(self) -> float:
        """Half linewidth (HWHM) in Hz."""
        return derive_linewidth(self)

    @property
    def gamma(self) -> float:
        """Half linewidth as an angular amplitude decay rate (rad/s)."""
        return 2 * math.pi * self.linewidth

    @property
    def laser_frequency(self) -> float:
        return CONST.c / self.wavelength

    @property
    def omega0(self) -> float:
        return 2 * math.pi * self.laser_frequency


def derive_linewidth(config: CavityConfig) -> float:
    return CONST.c / (4 * config.length * config.finesse)


def infer_loss_rt(finesse: float, T_in: float, T_end: float) -> float:
    """Round-trip loss implied by a measured finesse and known transmissions."""
    return 2 * math.pi / finesse - T_in - T_end


@dataclass(frozen=True)
class NoiseParams:
    rin: float = 0.0
    dark_asd: float = 0.0

    def __post_init__(self):
        if not self.rin >= 0:
            raise ConfigError(f"rin must be >= 0 (got {self.rin})")
        if not self.dark_asd >= 0:
            raise ConfigError(f"dark_asd must be >= 0 (got {self.dark_asd})")


@dataclass(frozen=True)
class OperatingPoint:
    P_in: float
    detuning: float
    P_circ: float
    P_refl: float
    P_trans: float
    detection_quadrature: float = math.pi / 2
    label: str = ""

    def __post_init__(self):
        if not self.P_in >= 0:
            raise ConfigError(f"P_in must be >= 0 (got {self.P_in})")
        if not self.P_circ >= 0:
            raise ConfigError(f"P_circ must be >= 0 (got {self.P_circ})")
        if self.P_refl + self.P_trans > self.P_in * (1 + 1e-12) + 1e-30:
            raise ConfigError("P_refl + P_trans must not exceed P_in")


@dataclass(frozen=True)
class FrequencyGrid:
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ConfigError("frequency grid must be a non-empty 1-d sequence")
        if not np.all(pts > 0):
            raise ConfigError("frequency grid points must be > 0")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise ConfigError("frequency grid must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def logspace(cls, f_min: float = 100.0, f_max: float = 1e6, per_decade: int = 500) -> FrequencyGrid:
        n = int(round(per_decade * math.log10(f_max / f_min))) + 1
        return cls(np.logspace(math.log10(f_min), math.log10(f_max), n))

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, FrequencyGrid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.all(self.points == other.points))

    def __hash__(self):
        return hash(self.points.tobytes())


@dataclass(frozen=True)
class NoiseSpectrum:
    """Single-sided amplitude spectral density on a frequency grid (m/rtHz)."""

    grid: FrequencyGrid
    asd: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        asd = np.array(self.asd, dtype=float)
        if asd.shape != self.grid.points.shape:
            raise ValueError(f"{self.label or 'spectrum'}: asd length {asd.size} != grid length {len(self.grid)}")
        if not np.all(np.isfinite(asd)) or np.any(asd < 0):
            raise ValueError(f"{self.label or 'spectrum'}: asd values must be finite and >= 0")
        asd.setflags(write=False)
        object.__setattr__(self, "asd", asd)

    @property
    def f(self) -> np.ndarray:
        return self.grid.points

    @property
    def psd(self) -> np.ndarray:
        return self.asd**2

    def relabel(self, label: str) -> "NoiseSpectrum":
        return NoiseSpectrum(self.grid, self.asd, label)

    def scaled(self, factor) -> "NoiseSpectrum":
        return NoiseSpectrum(self.grid, self.asd * factor, self.label)


# ---------------------------------------------------------------------------
# config file I/O


def _num(section: dict, key: str, where: str, default: Any = None) -> float:
    if key not in section:
        if default is not None:
            return float(default)
        raise ConfigError(f"{where}: missing key {key!r}")
    try:
        return float(section[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: {key!r} is not a number ({section[key]!r})") from None


def _section(doc: dict, key: str) -> dict:
    sec = doc.get(key)
    if not isinstance(sec, dict):
        raise ConfigError(f"missing or malformed section {key!r}")
    return sec


def parse_config(doc: dict, base_dir: Path | None = None):
    """Build validated config objects from an already-parsed YAML mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    cav = _section(doc, "cavity")
    config = CavityConfig(
        length=_num(cav, "length_m", "cavity"),
        wavelength=_num(cav, "wavelength_m", "cavity"),
        T_in=_num(cav, "input_transmission", "cavity"),
        T_end=_num(cav, "end_transmission", "cavity"),
        loss_rt=_num(cav, "round_trip_loss", "cavity"),
        temperature=_num(cav, "temperature_k", "cavity", default=295.0),
    )

    mech = _section(doc, "mechanics")
    raw_modes = mech.get("modes")
    if not isinstance(raw_modes, list) or not raw_modes:
        raise ConfigError("mechanics.modes must be a non-empty list")
    modes, scales = [], []
    for i, m in enumerate(raw_modes):
        where = f"mechanics.modes[{i}]"
        if not isinstance(m, dict):
            raise ConfigError(f"{where}: must be a mapping")
        modes.append(MechanicalMode(
            name=str(m.get("name", f"mode{i}")),
            f_m=_num(m, "f_m_hz", where),
            Q=_num(m, "q", where),
            modal_mass=_num(m, "modal_mass_kg", where),
            damping=str(m.get("damping", "structural")),
            uncertain=bool(m.get("uncertain", False)),
        ))
        scales.append(_num(m, "coupling_scale", where, default=1.0))
    model = MechanicalModel(tuple(modes), tuple(scales))

    noise_sec = doc.get("noise", {}) or {}
    noise = NoiseParams(
        rin=_num(noise_sec, "rin_per_sqrthz", "noise", default=0.0),
        dark_asd=_num(noise_sec, "dark_asd_w_per_sqrthz", "noise", default=0.0),
    )

    # local import keeps params free of a hard dependency cycle
    from .quantum import operating_point, operating_point_for_circulating

    ops = []
    for i, op in enumerate(doc.get("operating_points", []) or []):
        where = f"operating_points[{i}]"
        det = _num(op, "detuning_hwhm", where)
        quad = _num(op, "detection_quadrature_rad", where, default=math.pi / 2)
        label = str(op.get("label", f"op{i}"))
        keys = [k for k in ("p_circ_w", "p_in_w") if k in op]
        if len(keys) != 1:
            raise ConfigError(f"{where}: needs exactly one of p_circ_w or p_in_w")
        power = _num(op, keys[0], where)
        if not power >= 0:
            raise ConfigError(f"{where}: {keys[0]} must be >= 0 (got {power})")
        if keys[0] == "p_circ_w":
            ops.append(operating_point_for_circulating(config, power, det, quad, label))
        else:
            ops.append(operating_point(config, power, det, quad, label))
    return config, model, noise, ops


def load_config(path):
    """Load and validate a config file.

    Returns ``(CavityConfig, MechanicalModel, NoiseParams, list[OperatingPoint])``.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse error in {path}: {exc}") from None
    return parse_config(doc, path.parent)


def config_to_dict(config: CavityConfig, model: MechanicalModel, noise: NoiseParams,
                   ops: Sequence[OperatingPoint] = ()) -> dict:
    modes = []
    for mode, scale in zip(model.modes, model.coupling_scale):
        entry = {
            "name": mode.name,
            "f_m_hz": mode.f_m,
            "q": mode.Q,
            "modal_mass_kg": mode.modal_mass,
            "damping": mode.damping,
            "coupling_scale": scale,
            "uncertain": mode.uncertain,
        }
        modes.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "cavity": {
            "length_m": config.length,
            "wavelength_m": config.wavelength,
            "input_transmission": config.T_in,
            "end_transmission": config.T_end,
            "round_trip_loss": config.loss_rt,
            "temperature_k": config.temperature,
        },
        "mechanics": {"modes": modes},
        "noise": {
            "rin_per_sqrthz": noise.rin,
            "dark_asd_w_per_sqrthz": noise.dark_asd,
        },
        "operating_points": [
            {
                "label": op.label,
                "p_circ_w": op.P_circ,
                "detuning_hwhm": op.detuning,
                "detection_quadrature_rad": op.detection_quadrature,
            }
            for op in ops
        ],
    }


def save_config(path, config, model, noise, ops=()) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(config, model, noise, ops), sort_keys=False))
