import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optomech_noise.mechanics import (
    effective_susceptibility,
    mode_susceptibility,
    spring_resonance,
    structural_susceptibility,
    total_susceptibility,
    viscous_susceptibility,
)
from optomech_noise.params import MechanicalMode, MechanicalModel

FUND = MechanicalMode("fundamental", 876.0, 16000.0, 55e-12)
VISC = MechanicalMode("fundamental", 876.0, 16000.0, 55e-12, damping="viscous")
WM = 2 * math.pi * 876.0


def test_static_compliance():
    chi = structural_susceptibility(FUND, 1e-3)
    assert abs(chi) == pytest.approx(1 / (55e-12 * WM**2), rel=1e-6)


@pytest.mark.parametrize("mode", [FUND, VISC])
def test_resonance_amplification(mode):
    assert abs(mode_susceptibility(mode, 876.0)) == pytest.approx(16000 / (55e-12 * WM**2), rel=1e-12)


def test_omega_squared_falloff():
    # |chi| ~ 1/|wm^2 - w^2| far from resonance: (100^2 - 1) / (10^2 - 1) = 101.0
    ratio = abs(structural_susceptibility(FUND, 8760.0)) / abs(structural_susceptibility(FUND, 87600.0))
    assert ratio == pytest.approx(9999 / 99, rel=1e-6)
    assert ratio == pytest.approx(100, rel=0.015)


@given(st.floats(1.0, 1e7))
def test_imag_nonpositive(f):
    for mode in (FUND, VISC):
        assert np.imag(mode_susceptibility(mode, f)) <= 0


def test_viscous_lossless_limit():
    m = MechanicalMode("x", 876.0, 1e15, 55e-12, damping="viscous")
    chi = viscous_susceptibility(m, 2000.0)
    expect = 1 / (55e-12 * (WM**2 - (2 * math.pi * 2000.0) ** 2))
    assert chi.real == pytest.approx(expect, rel=1e-12)
    assert abs(chi.imag / chi.real) < 1e-12


def test_viscous_imag_falls_as_omega_cubed():
    # Im(chi) ~ -w wm / Q / (m w^4) well above resonance
    f1, f2 = 87600.0, 876000.0
    r = np.imag(viscous_susceptibility(VISC, f1)) / np.imag(viscous_susceptibility(VISC, f2))
    assert r == pytest.approx(1e3, rel=1e-3)


def test_laws_agree_at_resonance():
    a = abs(structural_susceptibility(FUND, 876.0))
    b = abs(viscous_susceptibility(VISC, 876.0))
    assert abs(a / b - 1) <= 1 / (2 * 16000)


def test_laws_converge_at_high_f():
    f = np.array([1e5, 1e6, 1e7])
    r = np.abs(structural_susceptibility(FUND, f)) / np.abs(viscous_susceptibility(VISC, f))
    assert np.all(np.abs(r - 1) < 1e-8)


def test_zero_frequency_rejected():
    with pytest.raises(ValueError):
        structural_susceptibility(FUND, 0.0)
    with pytest.raises(ValueError):
        viscous_susceptibility(VISC, -1.0)


def test_effective_identity_bit_exact():
    f = np.logspace(2, 6, 50)
    chi = structural_susceptibility(FUND, f)
    out = effective_susceptibility(chi, np.zeros_like(f))
    assert np.array_equal(out, chi)


def test_real_spring_shifts_resonance():
    # resonance of 1/(m(wm^2 - w^2) + K) moves to sqrt(fm^2 + K/(4 pi^2 m))
    K = 30.0
    expect = math.sqrt(876.0**2 + K / (4 * math.pi**2 * 55e-12))
    f = np.linspace(0.9 * expect, 1.1 * expect, 200001)
    chi = structural_susceptibility(FUND, f)
    got = spring_resonance(f, chi, np.full_like(f, K))
    assert got == pytest.approx(expect, rel=1e-5)


def test_total_susceptibility_weights():
    a = MechanicalMode("a", 1e3, 10.0, 1e-9)
    b = MechanicalMode("b", 5e3, 20.0, 2e-9)
    f = np.logspace(2, 5, 20)
    model = MechanicalModel((a, b), (1.0, 0.3))
    expect = structural_susceptibility(a, f) + 0.09 * structural_susceptibility(b, f)
    assert np.allclose(total_susceptibility(model, f), expect, rtol=1e-14)


@settings(max_examples=30)
@given(st.floats(1e2, 1e6))
def test_effective_matches_closed_form(f):
    K = 10.0 + 3.0j
    chi = structural_susceptibility(FUND, f)
    direct = 1 / (55e-12 * (WM**2 - (2 * math.pi * f) ** 2 + 1j * WM**2 / 16000) + K)
    assert effective_susceptibility(chi, K) == pytest.approx(direct, rel=1e-9)
