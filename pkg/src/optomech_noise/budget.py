"""Noise budget assembly and the analyses run on it."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from . import quantum
from .mechanics import total_susceptibility
from .params import (
    CONST,
    CavityConfig,
    FrequencyGrid,
    MechanicalModel,
    NoiseParams,
    NoiseSpectrum,
    OperatingPoint,
)
from .thermal import total_thermal_asd

COMPONENTS = ("thermal", "qrpn", "shot", "dark", "crpn")


@dataclass(frozen=True)
class NoiseBudget:
    components: dict[str, NoiseSpectrum]
    total: NoiseSpectrum
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def grid(self) -> FrequencyGrid:
        return self.total.grid

    def __getitem__(self, label: str) -> NoiseSpectrum:
        return self.components[label]

    def without(self, *labels: str) -> NoiseBudget:
        return assemble_budget([s for k, s in self.components.items() if k not in labels], meta=self.meta)


@dataclass(frozen=True)
class BandStat:
    band: tuple[float, float]
    rms: dict[str, float]
    fractions: dict[str, float]
    total_rms: float

    def fraction(self, *labels: str) -> float:
        return sum(self.fractions[k] for k in labels)


def assemble_budget(components, meta: dict | None = None) -> NoiseBudget:
    components = list(components)
    if not components:
        raise ValueError("a budget needs at least one component")
    grid = components[0].grid
    comps = {}
    for i, s in enumerate(components):
        if s.grid != grid:
            raise ValueError(f"component {s.label or i!r} is on a different grid")
        comps[s.label or f"c{i}"] = s
    psd = np.sum([s.psd for s in comps.values()], axis=0)
    return NoiseBudget(comps, NoiseSpectrum(grid, np.sqrt(psd), "total"), dict(meta or {}))


# ---------------------------------------------------------------------------
# band statistics


def _check_band(grid: FrequencyGrid, band) -> tuple[float, float]:
    f1, f2 = float(band[0]), float(band[1])
    f = grid.points
    if not f1 < f2:
        raise ValueError(f"band {band}: lower edge must be below upper edge")
    if f1 < f[0] or f2 > f[-1]:
        raise ValueError(f"band {band} Hz lies outside the grid [{f[0]:g}, {f[-1]:g}] Hz")
    inside = np.count_nonzero((f >= f1) & (f <= f2))
    if inside < 2:
        raise ValueError(f"band {band} Hz contains fewer than 2 grid points")
    return f1, f2


def _loglog_interp(x, xp, yp):
    """Log-log interpolation that tolerates exact zeros in yp."""
    yp = np.asarray(yp, dtype=float)
    if np.all(yp > 0):
        return np.exp(np.interp(np.log(x), np.log(xp), np.log(yp)))
    return np.interp(np.log(x), np.log(xp), yp)


def band_integrate(spectrum: NoiseSpectrum, band) -> float:
    """RMS over a band: sqrt of the trapezoidal integral of the PSD.

    Band edges that fall between grid points are filled in by log-log
    interpolation of the PSD.
    """
    f1, f2 = _check_band(spectrum.grid, band)
    f = spectrum.f
    sel = (f > f1) & (f < f2)
    ff = np.concatenate(([f1], f[sel], [f2]))
    psd = _loglog_interp(ff, f, spectrum.psd)
    return math.sqrt(trapezoid(psd, ff))


def attribute(budget: NoiseBudget, band) -> BandStat:
    rms = {k: band_integrate(s, band) for k, s in budget.components.items()}
    power = sum(r * r for r in rms.values())
    fractions = {k: (r * r / power if power > 0 else 0.0) for k, r in rms.items()}
    return BandStat((float(band[0]), float(band[1])), rms, fractions, math.sqrt(power))


def dominance_map(budget: NoiseBudget) -> np.ndarray:
    labels = list(budget.components)
    stack = np.vstack([budget.components[k].psd for k in labels])
    return np.array(labels, dtype=object)[np.argmax(stack, axis=0)]


def dominant_at(budget: NoiseBudget, f: float) -> str:
    i = int(np.argmin(np.abs(budget.grid.points - f)))
    return str(dominance_map(budget)[i])


def fit_loglog_slope(spectrum: NoiseSpectrum, band) -> float:
    f = spectrum.f
    sel = (f >= band[0]) & (f <= band[1])
    if np.count_nonzero(sel) < 3:
        raise ValueError(f"band {tuple(band)} Hz needs at least 3 grid points for a slope fit")
    slope, _ = np.polyfit(np.log(f[sel]), np.log(spectrum.asd[sel]), 1)
    return float(slope)


def fit_power_law(x, y) -> float:
    """Exponent alpha of y = A x^alpha by least squares in log-log."""
    alpha, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(alpha)


def sql_asd(mass: float, grid: FrequencyGrid) -> NoiseSpectrum:
    w = 2 * np.pi * grid.points
    return NoiseSpectrum(grid, np.sqrt(2 * CONST.hbar / (mass * w**2)), "sql")


def sql_ratio(budget: NoiseBudget, mass: float, band=None) -> tuple[float, float]:
    """Minimum of total/SQL (and where it occurs), optionally within a band."""
    f = budget.grid.points
    ratio = budget.total.asd / sql_asd(mass, budget.grid).asd
    sel = np.ones_like(f, dtype=bool) if band is None else (f >= band[0]) & (f <= band[1])
    i = np.flatnonzero(sel)[np.argmin(ratio[sel])]
    return float(ratio[i]), float(f[i])


def psd_fraction_at(budget: NoiseBudget, label: str, f: float) -> float:
    i = int(np.argmin(np.abs(budget.grid.points - f)))
    return float(budget.components[label].psd[i] / budget.total.psd[i])


# ---------------------------------------------------------------------------
# model budgets


def model_budget(config: CavityConfig, model: MechanicalModel, noise: NoiseParams,
                 op: OperatingPoint, grid: FrequencyGrid, frame: str = "calibrated") -> NoiseBudget:
    """Full displacement budget at one operating point.

    ``frame="calibrated"`` gives what a spectrum calibrated through the
    optical-spring-suppressed signal path shows; ``frame="physical"``
    divides every component by |1 + K chi| to give the mirror's actual
    closed-loop motion.
    """
    f = grid.points
    chi = total_susceptibility(model, f)
    comps = [
        total_thermal_asd(model, config.temperature, grid),
        quantum.qrpn_displacement_asd(config, op, chi, grid),
        *quantum.shot_noise_displacement_asd(config, op, chi, grid, noise),
        quantum.classical_rpn_asd(config, op, chi, noise.rin, grid),
    ]
    if frame == "physical":
        supp = quantum.spring_suppression(config, op, chi, f)
        comps = [c.scaled(1 / supp) for c in comps]
    elif frame != "calibrated":
        raise ValueError(f"unknown frame {frame!r}")
    meta = {
        "label": op.label,
        "P_circ": op.P_circ,
        "P_in": op.P_in,
        "detuning": op.detuning,
        "detection_quadrature": op.detection_quadrature,
        "frame": frame,
    }
    return assemble_budget(comps, meta)


@dataclass(frozen=True)
class ScanPoint:
    op: OperatingPoint
    budget: NoiseBudget
    stat: BandStat
    no_qrpn_rms: float
    spring_hz: float


def power_scan(config: CavityConfig, model: MechanicalModel, noise: NoiseParams, detuning,
               powers, grid: FrequencyGrid, band=(21e3, 22e3),
               detection_quadrature: float = math.pi / 2) -> list[ScanPoint]:
    """Budgets and band statistics for a list of circulating powers.

    ``detuning`` may be a scalar or one value per power.
    """
    dets = np.broadcast_to(np.asarray(detuning, dtype=float), (len(powers),))
    out = []
    for P, d in zip(powers, dets):
        op = quantum.operating_point_for_circulating(config, P, float(d), detection_quadrature,
                                                     label=f"{P * 1e3:g}mW")
        b = model_budget(config, model, noise, op, grid)
        stat = attribute(b, band)
        no_q = band_integrate(b.without("qrpn").total, band)
        out.append(ScanPoint(op, b, stat, no_q, quantum.spring_frequency(config, model, op)))
    return out


# ---------------------------------------------------------------------------
# free-parameter fit


@dataclass(frozen=True)
class FreeParameterFit:
    detuning: float
    detection_quadrature: float
    dark_asd: float
    fractions: dict[str, float]
    residual: float


def fit_free_parameters(config: CavityConfig, model: MechanicalModel, noise: NoiseParams,
                        P_circ: float, grid: FrequencyGrid, targets: dict[str, float],
                        band=(21e3, 22e3), x0=(0.6, 1.0, 1e-12),
                        detuning_bounds=(0.5, 0.7)) -> FreeParameterFit:
    """Fit detuning, detection quadrature and dark noise to band fractions.

    ``targets`` maps a '+'-joined component group (e.g. ``"shot+dark"``)
    to its wanted PSD share. Only these three parameters move; everything
    else in the model is held fixed. A weak pull towards ``x0`` picks one
    solution when the targets underdetermine the fit.
    """
    from scipy.optimize import least_squares

    dark_unit = 1e-12
    start = np.array([x0[0], x0[1], x0[2] / dark_unit])
    lo = np.array([detuning_bounds[0], 0.0, 0.0])
    hi = np.array([detuning_bounds[1], math.pi, 100.0])
    start = np.clip(start, lo, hi)
    groups = {k: k.split("+") for k in targets}

    def fractions(x):
        op = quantum.operating_point_for_circulating(config, P_circ, x[0], x[1])
        nz = NoiseParams(noise.rin, x[2] * dark_unit)
        stat = attribute(model_budget(config, model, nz, op, grid), band)
        return {k: stat.fraction(*g) for k, g in groups.items()}

    def residuals(x):
        fr = fractions(x)
        miss = [fr[k] - targets[k] for k in targets]
        return np.concatenate([miss, 1e-3 * (x - start)])

    res = least_squares(residuals, start, bounds=(lo, hi), x_scale=np.array([0.1, 0.1, 1.0]))
    fr = fractions(res.x)
    rms = math.sqrt(sum((fr[k] - targets[k]) ** 2 for k in targets) / len(targets))
    return FreeParameterFit(float(res.x[0]), float(res.x[1]), float(res.x[2] * dark_unit), fr, rms)
