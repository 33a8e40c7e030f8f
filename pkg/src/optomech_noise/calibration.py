"""Error-signal calibration chain.

A cavity-length change dx and a laser-frequency change dnu are
indistinguishable to the cavity (dx / L = dnu / nu), so injecting a known
frequency modulation and recording the error-signal response measures the
displacement-to-detector transfer function. That measured function
already contains the optical-spring suppression and the servo loop
suppression, so the calibrated spectrum is the raw spectrum divided by it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quantum
from .budget import NoiseBudget
from .mechanics import total_susceptibility
from .params import CONST, CavityConfig, MechanicalModel, NoiseSpectrum, OperatingPoint


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationChain:
    """Constants of the readout chain.

    The loop is a single integrator pole, G(f) = f_ugf / (i f), so it has
    unit magnitude at ``loop_ugf_hz``; ``loop_ugf_hz = 0`` disables it.
    Detector gain and piezo response are placeholders that cancel in any
    synthesise-then-calibrate round trip.
    """

    length: float
    laser_frequency: float
    loop_ugf_hz: float = 0.0
    detector_gain: float = 1.0  # V/W

    def __post_init__(self):
        if not self.length > 0:
            raise CalibrationError(f"length must be > 0 (got {self.length})")
        if not self.laser_frequency > 0:
            raise CalibrationError(f"laser_frequency must be > 0 (got {self.laser_frequency})")
        if not self.loop_ugf_hz >= 0:
            raise CalibrationError(f"loop_ugf_hz must be >= 0 (got {self.loop_ugf_hz})")
        if not self.detector_gain > 0:
            raise CalibrationError(f"detector_gain must be > 0 (got {self.detector_gain})")

    @classmethod
    def for_cavity(cls, config: CavityConfig, loop_ugf_hz: float = 0.0, detector_gain: float = 1.0):
        return cls(config.length, config.laser_frequency, loop_ugf_hz, detector_gain)

    def loop_gain(self, f):
        f = np.asarray(f, dtype=float)
        return self.loop_ugf_hz / (1j * f)


def frequency_shift_to_displacement(dnu, chain: CalibrationChain):
    """Equivalent length change for a laser-frequency shift: L dnu / nu."""
    return chain.length * np.asarray(dnu, dtype=float) / chain.laser_frequency


def displacement_to_detector_tf(chain: CalibrationChain, config: CavityConfig, model: MechanicalModel,
                                op: OperatingPoint, f):
    """Complex error-signal response (V/m) to a calibration length signal.

    Product of the detector gain, the reflected-carrier conversion from
    quadrature to power, the cavity signal response projected on the
    detection quadrature, the optical-spring suppression 1/(1 + K chi) and
    the loop suppression 1/(1 + G).
    """
    f = np.asarray(f, dtype=float)
    chi = total_susceptibility(model, f)
    K = quantum.optical_spring(config, op, f)
    watts_per_quad = math.sqrt(2 * CONST.hbar * config.omega0 * op.P_refl)
    cavity = quantum.signal_gain(config, op, f)
    return chain.detector_gain * watts_per_quad * cavity / (1 + K * chi) / (1 + chain.loop_gain(f))


def frequency_injection_tf(chain: CalibrationChain, config: CavityConfig, model: MechanicalModel,
                           op: OperatingPoint, f):
    """Error-signal response per Hz of laser-frequency modulation (V/Hz)."""
    return displacement_to_detector_tf(chain, config, model, op, f) * chain.length / chain.laser_frequency


def apply_calibration(raw: NoiseSpectrum, tf, floor: float = 0.0) -> NoiseSpectrum:
    """Convert a detector-referred ASD to displacement, raw / |tf|.

    Raises CalibrationError at the first frequency where |tf| <= floor.
    """
    mag = np.abs(np.broadcast_to(np.asarray(tf), raw.asd.shape))
    bad = np.flatnonzero(~(mag > floor))
    if bad.size:
        f_bad = raw.f[bad[0]]
        raise CalibrationError(
            f"calibration transfer function |tf| = {mag[bad[0]]:.3g} is below the floor "
            f"{floor:.3g} at {f_bad:.6g} Hz")
    return NoiseSpectrum(raw.grid, raw.asd / mag, raw.label)


def synthesize_error_signal(budget: NoiseBudget, chain: CalibrationChain, config: CavityConfig,
                            model: MechanicalModel, op: OperatingPoint) -> NoiseSpectrum:
    """Detector-referred ASD (V/rtHz) that a calibrated budget total would produce."""
    tf = displacement_to_detector_tf(chain, config, model, op, budget.grid.points)
    return NoiseSpectrum(budget.grid, budget.total.asd * np.abs(tf), "raw")


def round_trip(budget: NoiseBudget, chain: CalibrationChain, config: CavityConfig, model: MechanicalModel,
               op: OperatingPoint) -> NoiseSpectrum:
    """Synthesise the error signal for ``budget`` and calibrate it back."""
    raw = synthesize_error_signal(budget, chain, config, model, op)
    tf = displacement_to_detector_tf(chain, config, model, op, budget.grid.points)
    return apply_calibration(raw, tf)
