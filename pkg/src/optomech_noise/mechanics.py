"""Mechanical susceptibilities.

Sign convention: chi(w) = 1 / (m (w_m^2 - w^2 + i D(w))) with a positive
dissipation term D, so Im(chi) <= 0 for w > 0. The optical spring K enters
as chi / (1 + K chi).
"""
from __future__ import annotations

import numpy as np

from .params import MechanicalMode, MechanicalModel


def _omega(f):
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("susceptibility requires f > 0")
    return 2 * np.pi * f


def structural_susceptibility(mode: MechanicalMode, f):
    w = _omega(f)
    wm = mode.omega_m
    return 1.0 / (mode.modal_mass * (wm**2 - w**2 + 1j * wm**2 / mode.Q))


def viscous_susceptibility(mode: MechanicalMode, f):
    w = _omega(f)
    wm = mode.omega_m
    return 1.0 / (mode.modal_mass * (wm**2 - w**2 + 1j * w * wm / mode.Q))


_LAWS = {
    "structural": structural_susceptibility,
    "viscous": viscous_susceptibility,
}


def mode_susceptibility(mode: MechanicalMode, f):
    return _LAWS[mode.damping](mode, f)


def total_susceptibility(model: MechanicalModel, f):
    """Displacement response at the beam spot, summed over modes.

    Each mode is weighted by coupling_scale**2 so that the thermal PSD
    obtained from the fluctuation-dissipation theorem equals the
    quadrature sum of the scaled single-mode ASDs.
    """
    total = 0j
    for mode, s in zip(model.modes, model.coupling_scale):
        total = total + s**2 * mode_susceptibility(mode, f)
    return total


def effective_susceptibility(chi, K):
    """Closed-loop response with an optical spring K (N/m)."""
    chi = np.asarray(chi)
    K = np.asarray(K)
    if not np.any(K):
        return chi
    return chi / (1 + K * chi)


def spring_resonance(f, chi, K) -> float:
    """Frequency on the grid ``f`` where |1 + K chi| is smallest."""
    f = np.asarray(f, dtype=float)
    return float(f[np.argmin(np.abs(1 + np.asarray(K) * np.asarray(chi)))])
