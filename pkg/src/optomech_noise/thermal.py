"""Thermal displacement noise from the fluctuation-dissipation theorem.

Single-sided convention: S_x(w) = (4 k_B T / w) * Im[-chi(w)]. For a
structurally damped mode this is exactly

    x(w) = sqrt(4 k_B T w_m^2 / (w m Q [(w_m^2 - w^2)^2 + w_m^4 / Q^2]))
"""
from __future__ import annotations

import numpy as np

from .mechanics import mode_susceptibility
from .params import CONST, FrequencyGrid, MechanicalMode, MechanicalModel, NoiseSpectrum


def _check_temperature(T: float) -> None:
    if not T > 0:
        raise ValueError(f"temperature must be > 0 (got {T})")


def fdt_psd(chi, f, T: float):
    w = 2 * np.pi * np.asarray(f, dtype=float)
    # clip rounding-level negatives; Im(-chi) >= 0 for every damping law here
    return np.maximum(4 * CONST.k_B * T / w * np.imag(-np.asarray(chi)), 0.0)


def mode_thermal_asd(mode: MechanicalMode, T: float, grid: FrequencyGrid) -> NoiseSpectrum:
    _check_temperature(T)
    chi = mode_susceptibility(mode, grid.points)
    return NoiseSpectrum(grid, np.sqrt(fdt_psd(chi, grid.points, T)), f"thermal:{mode.name}")


def total_thermal_asd(model: MechanicalModel, T: float, grid: FrequencyGrid) -> NoiseSpectrum:
    _check_temperature(T)
    psd = np.zeros(len(grid))
    for mode, s in zip(model.modes, model.coupling_scale):
        psd += s**2 * mode_thermal_asd(mode, T, grid).psd
    return NoiseSpectrum(grid, np.sqrt(psd), "thermal")


def infer_temperature_ratio(asd_a: NoiseSpectrum, asd_b: NoiseSpectrum, band) -> float:
    """Temperature ratio T_b / T_a from band-integrated thermal PSD.

    The band should sit where thermal noise dominates both spectra; that
    choice is left to the caller.
    """
    from .budget import band_integrate

    if asd_a.grid != asd_b.grid:
        raise ValueError("spectra must share a frequency grid")
    return band_integrate(asd_b, band) ** 2 / band_integrate(asd_a, band) ** 2
