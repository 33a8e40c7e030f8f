"""Quadrature input-output model of a detuned, lossy single-mode cavity.

Model
-----
One optical mode, two input ports: the input coupler (the moving mirror,
transmission T_in) and a lumped loss port collecting the end-mirror
transmission and the round-trip loss. Port decay rates are
kappa = c T / (4 L) and the total is the HWHM gamma.

Fluctuations use the two-photon (amplitude, phase) quadratures in the
frame where the intracavity carrier is real, with e^{+i Omega t}
frequency dependence. Vacuum has unit single-sided spectral density in
each quadrature. The intracavity quadratures obey

    M a = sum_k sqrt(2 kappa_k) u_k + s x,
    M = [[gamma + i Omega, -Delta], [Delta, gamma + i Omega]],
    s = [0, sqrt(2) G abar],

with Delta = -detuning * gamma the cavity-minus-laser angular offset,
G = omega0 / L and abar^2 the intracavity photon number. The reflected
field is b = sqrt(2 kappa_in) a - u_in. The radiation-pressure force is
dF = sqrt(2) hbar G abar a_1 and acts along +x (lengthening the cavity).

Displacement referencing
------------------------
The measured spectrum is calibrated by injecting a laser-frequency
(equivalent cavity length) signal, which the optical spring suppresses
by the same 1/(1 + K chi) as the mirror's own motion. Calibrated
spectra therefore show force noise through the bare mechanical
response chi, and readout noise multiplied by |1 + K chi|. All
``*_asd`` functions here return that calibrated displacement unless
noted otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .mechanics import effective_susceptibility, total_susceptibility
from .params import CONST, CavityConfig, FrequencyGrid, MechanicalModel, NoiseParams, NoiseSpectrum, OperatingPoint


def _rates(config: CavityConfig):
    k = CONST.c / (4 * config.length)
    return k * config.T_in, k * (config.T_end + config.loss_rt), k * config.T_end


def _photon_energy(config: CavityConfig) -> float:
    return CONST.hbar * config.omega0


# ---------------------------------------------------------------------------
# static operating point


def _static_fields(config: CavityConfig, P_in: float, detuning: float):
    """Carrier amplitudes (photon-flux / photon-number normalised)."""
    k_in, _, k_end = _rates(config)
    g = config.gamma
    delta = -detuning * g
    a_in = math.sqrt(P_in / _photon_energy(config))
    a = math.sqrt(2 * k_in) * a_in / (g + 1j * delta)
    b = math.sqrt(2 * k_in) * a - a_in
    return a_in, a, b, k_end


def operating_point(config: CavityConfig, P_in: float, detuning: float,
                    detection_quadrature: float = math.pi / 2, label: str = "") -> OperatingPoint:
    if not P_in >= 0:
        raise ValueError(f"P_in must be >= 0 (got {P_in})")
    _, a, b, k_end = _static_fields(config, P_in, detuning)
    hw = _photon_energy(config)
    n = abs(a) ** 2
    P_circ = n * hw * config.fsr
    return OperatingPoint(
        P_in=P_in,
        detuning=detuning,
        P_circ=P_circ,
        P_refl=abs(b) ** 2 * hw,
        P_trans=2 * k_end * n * hw,
        detection_quadrature=detection_quadrature,
        label=label,
    )


def buildup(config: CavityConfig, detuning: float) -> float:
    """P_circ / P_in."""
    return operating_point(config, 1.0, detuning).P_circ


def operating_point_for_circulating(config: CavityConfig, P_circ: float, detuning: float,
                                    detection_quadrature: float = math.pi / 2,
                                    label: str = "") -> OperatingPoint:
    """Operating point with the input power chosen to give ``P_circ``."""
    return operating_point(config, P_circ / buildup(config, detuning), detuning,
                           detection_quadrature, label)


def photon_number(config: CavityConfig, op: OperatingPoint) -> float:
    return op.P_circ / (_photon_energy(config) * config.fsr)


# ---------------------------------------------------------------------------
# sideband transfer


@dataclass(frozen=True)
class CavityTransfer:
    """Quadrature transfer matrices, stacked along the first axis per frequency.

    Shapes are (N, 2, 2) for matrices and (N, 2) for vectors.
    ``force_in``/``force_loss`` give the radiation-pressure force (N) per
    unit input quadrature; ``signal_intracavity``/``signal_reflected`` the
    field response per metre of cavity length change.
    """

    f: np.ndarray
    in_to_refl: np.ndarray
    in_to_cav: np.ndarray
    loss_to_refl: np.ndarray
    loss_to_cav: np.ndarray
    force_in: np.ndarray
    force_loss: np.ndarray
    signal_intracavity: np.ndarray
    signal_reflected: np.ndarray


def _inverse_M(config: CavityConfig, detuning: float, f):
    W = 2 * np.pi * np.atleast_1d(np.asarray(f, dtype=float))
    g = config.gamma
    delta = -detuning * g
    d = g + 1j * W
    det = d**2 + delta**2
    Minv = np.empty(W.shape + (2, 2), dtype=complex)
    Minv[:, 0, 0] = d / det
    Minv[:, 0, 1] = delta / det
    Minv[:, 1, 0] = -delta / det
    Minv[:, 1, 1] = d / det
    return Minv


def cavity_transfer(config: CavityConfig, op: OperatingPoint, f) -> CavityTransfer:
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if np.any(f <= 0):
        raise ValueError("cavity_transfer requires f > 0")
    k_in, k_loss, _ = _rates(config)
    Minv = _inverse_M(config, op.detuning, f)
    eye = np.eye(2)
    in_to_cav = math.sqrt(2 * k_in) * Minv
    loss_to_cav = math.sqrt(2 * k_loss) * Minv
    in_to_refl = math.sqrt(2 * k_in) * in_to_cav - eye
    loss_to_refl = math.sqrt(2 * k_in) * loss_to_cav

    abar = math.sqrt(photon_number(config, op))
    G = config.omega0 / config.length
    fvec = np.array([math.sqrt(2) * CONST.hbar * G * abar, 0.0])
    svec = np.array([0.0, math.sqrt(2) * G * abar])
    sig_cav = Minv @ svec
    return CavityTransfer(
        f=f,
        in_to_refl=in_to_refl,
        in_to_cav=in_to_cav,
        loss_to_refl=loss_to_refl,
        loss_to_cav=loss_to_cav,
        force_in=fvec @ in_to_cav,
        force_loss=fvec @ loss_to_cav,
        signal_intracavity=sig_cav,
        signal_reflected=math.sqrt(2 * k_in) * sig_cav,
    )


def optical_spring(config: CavityConfig, op: OperatingPoint, f):
    """Complex optical spring constant K(f) in N/m (F = -K x)."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    n = photon_number(config, op)
    G = config.omega0 / config.length
    g = config.gamma
    delta = -op.detuning * g
    W = 2 * np.pi * f
    det = (g + 1j * W) ** 2 + delta**2
    return -2 * CONST.hbar * G**2 * n * delta / det


def static_spring_constant(config: CavityConfig, op: OperatingPoint) -> float:
    """Zero-frequency optical spring, 4 P G detuning / (c gamma (1 + detuning^2))."""
    G = config.omega0 / config.length
    d = op.detuning
    return 4 * op.P_circ * G * d / (CONST.c * config.gamma * (1 + d * d))


def spring_frequency(config: CavityConfig, model: MechanicalModel, op: OperatingPoint,
                     f_lo: float = 1e3, f_hi: float = 1e7) -> float:
    """Optical-spring resonance: the minimum of |1 + K chi| over frequency."""
    f = np.logspace(math.log10(f_lo), math.log10(f_hi), 4001)

    def cost(logf):
        ff = 10.0**logf
        return float(np.abs(1 + optical_spring(config, op, ff) * total_susceptibility(model, ff))[0])

    vals = np.abs(1 + optical_spring(config, op, f) * total_susceptibility(model, f))
    i = int(np.argmin(vals))
    lo = math.log10(f[max(i - 1, 0)])
    hi = math.log10(f[min(i + 1, f.size - 1)])
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    return float(10.0**res.x)


# ---------------------------------------------------------------------------
# noise spectra


def qrpn_force_psd(config: CavityConfig, op: OperatingPoint, f):
    """Single-sided radiation-pressure force PSD (N^2/Hz) from vacuum at both ports."""
    tf = cavity_transfer(config, op, f)
    return np.sum(np.abs(tf.force_in) ** 2, axis=-1) + np.sum(np.abs(tf.force_loss) ** 2, axis=-1)


def qrpn_displacement_asd(config: CavityConfig, op: OperatingPoint, chi, grid: FrequencyGrid) -> NoiseSpectrum:
    """|chi| sqrt(S_F). Pass the bare response for calibrated displacement,
    or chi_eff for the physical mirror motion."""
    S_F = qrpn_force_psd(config, op, grid.points)
    return NoiseSpectrum(grid, np.abs(chi) * np.sqrt(S_F), "qrpn")


def readout_vector(op: OperatingPoint) -> np.ndarray:
    z = op.detection_quadrature
    return np.array([math.cos(z), math.sin(z)])


def signal_gain(config: CavityConfig, op: OperatingPoint, f):
    """Readout-quadrature response to a cavity-length change (sqrt(photons/s) per m)."""
    tf = cavity_transfer(config, op, f)
    return tf.signal_reflected @ readout_vector(op)


def readout_vacuum_psd(config: CavityConfig, op: OperatingPoint, f):
    """Direct (non-ponderomotive) vacuum noise in the readout quadrature."""
    tf = cavity_transfer(config, op, f)
    e = readout_vector(op)
    return (np.sum(np.abs(e @ tf.in_to_refl) ** 2, axis=-1)
            + np.sum(np.abs(e @ tf.loss_to_refl) ** 2, axis=-1))


def spring_suppression(config: CavityConfig, op: OperatingPoint, chi, f):
    """|1 + K chi|: factor by which the optical spring suppresses a length signal."""
    return np.abs(1 + optical_spring(config, op, f) * np.asarray(chi))


def shot_noise_displacement_asd(config: CavityConfig, op: OperatingPoint, chi, grid: FrequencyGrid,
                                noise: NoiseParams) -> tuple[NoiseSpectrum, NoiseSpectrum]:
    """Readout imprecision and detector dark noise, referred to calibrated displacement.

    Dark noise (W/rtHz) is converted to readout-quadrature units with the
    reflected carrier as the local oscillator, sqrt(2 hbar w0 P_refl) W per
    unit quadrature.
    """
    if op.P_circ == 0:
        raise ValueError("readout noise is undefined with no circulating power")
    f = grid.points
    gain = np.abs(signal_gain(config, op, f))
    supp = spring_suppression(config, op, chi, f)
    with np.errstate(divide="ignore", invalid="ignore"):
        shot = np.sqrt(readout_vacuum_psd(config, op, f)) / gain * supp
        lo = math.sqrt(2 * _photon_energy(config) * op.P_refl)
        dark = noise.dark_asd / lo / gain * supp if noise.dark_asd > 0 else np.zeros_like(f)
    return NoiseSpectrum(grid, shot, "shot"), NoiseSpectrum(grid, dark, "dark")


def classical_rpn_asd(config: CavityConfig, op: OperatingPoint, chi, rin, grid: FrequencyGrid) -> NoiseSpectrum:
    """Intensity-noise radiation pressure: rin * 2 P_circ / c through the cavity pole."""
    f = grid.points
    rin = np.broadcast_to(np.asarray(rin, dtype=float), f.shape)
    pole = 1 / np.abs(1 + 1j * f / config.linewidth)
    force = rin * 2 * op.P_circ / CONST.c * pole
    return NoiseSpectrum(grid, np.abs(chi) * force, "crpn")


def sql_force_product(config: CavityConfig, op: OperatingPoint, f):
    """sqrt(S_F) times the length imprecision without spring suppression."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    imprecision = np.sqrt(readout_vacuum_psd(config, op, f)) / np.abs(signal_gain(config, op, f))
    return np.sqrt(qrpn_force_psd(config, op, f)) * imprecision


def physical_susceptibility(config: CavityConfig, model: MechanicalModel, op: OperatingPoint, f):
    """chi_eff including the optical spring: the mirror's true closed-loop response."""
    return effective_susceptibility(total_susceptibility(model, f), optical_spring(config, op, f))
