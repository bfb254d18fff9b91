import math

import numpy as np
import pytest

from nfisac import (
    ArrayConfig,
    FrequencyGrid,
    PolarPoint,
    TtdConfig,
    beam_gain,
    focus_codeword,
    ideal_ttd_weights,
    nf_steering_matrix,
    steering_matrix,
    subarray_ttd_weights,
)

FC = 60e9


def test_ideal_ttd_squint_free():
    arr = ArrayConfig.half_wavelength(64, FC)
    grid = FrequencyGrid(FC, 6e9, 32)
    p = PolarPoint(3.0, 0.5)
    cw = ideal_ttd_weights(arr, grid, p)
    g = beam_gain(cw, nf_steering_matrix(arr, grid, p))
    assert np.max(np.abs(g - 64.0)) < 1e-9 * 64.0


def test_ideal_ttd_far_field_focus():
    arr = ArrayConfig.half_wavelength(32, FC)
    grid = FrequencyGrid(FC, 6e9, 16)
    p = PolarPoint.far_field(-0.4)
    cw = ideal_ttd_weights(arr, grid, p)
    g = beam_gain(cw, steering_matrix(arr, grid, p))
    assert np.max(np.abs(g - 32.0)) < 1e-9 * 32.0


def test_ideal_ttd_single_subcarrier_equals_phase_shifter():
    arr = ArrayConfig.half_wavelength(16, FC)
    grid = FrequencyGrid(FC, 1e6, 1)  # the only subcarrier sits at fc
    p = PolarPoint(4.0, 0.2)
    cw = ideal_ttd_weights(arr, grid, p)
    ps = focus_codeword(arr, FC, p)
    assert np.max(np.abs(np.angle(cw.weights[0] * np.conj(ps.weights)))) < 1e-12


def test_subarray_ttd_converges_to_ideal():
    arr = ArrayConfig.half_wavelength(32, FC)
    grid = FrequencyGrid(FC, 6e9, 8)
    p = PolarPoint(3.0, 0.3)
    ideal = ideal_ttd_weights(arr, grid, p)
    quant = subarray_ttd_weights(arr, grid, p, TtdConfig(n_units=32, resolution_s=1e-18))
    dphi = np.angle(quant.weights * np.conj(ideal.weights))
    assert np.max(np.abs(dphi)) < 1e-6


def test_subarray_ttd_paper_resolution_collapses_to_phase_shifter():
    # 50 ns steps dwarf the ~3.3 ns max delay of a 1 m aperture: all delays
    # quantize to zero and the beam reduces to the phase-shifter codeword
    arr = ArrayConfig(400, 0.0025)
    grid = FrequencyGrid(FC, 5e9, 16)
    p = PolarPoint(7.1, math.radians(45.0))
    quant = subarray_ttd_weights(arr, grid, p, TtdConfig(n_units=4, resolution_s=50e-9))
    ps = focus_codeword(arr, FC, p)
    for row in quant.weights:
        assert np.max(np.abs(np.angle(row * np.conj(ps.weights)))) < 1e-9


def test_subarray_ttd_gain_at_carrier_is_n():
    arr = ArrayConfig.half_wavelength(64, FC)
    p = PolarPoint(3.0, 0.5)
    grid1 = FrequencyGrid(FC, 1e6, 1)
    for res in (50e-9, 1e-10):
        quant = subarray_ttd_weights(arr, grid1, p, TtdConfig(n_units=4, resolution_s=res))
        g = beam_gain(quant, nf_steering_matrix(arr, grid1, p))
        assert g[0] == pytest.approx(64.0, rel=1e-9)


def test_subarray_ttd_between_phase_shifter_and_ideal():
    arr = ArrayConfig.half_wavelength(64, FC)
    grid = FrequencyGrid(FC, 6e9, 16)
    p = PolarPoint(3.0, 0.5)
    a = nf_steering_matrix(arr, grid, p)
    g_ideal = beam_gain(ideal_ttd_weights(arr, grid, p), a)
    g_ps = beam_gain(focus_codeword(arr, FC, p), a)
    quant = subarray_ttd_weights(arr, grid, p, TtdConfig(n_units=8, resolution_s=1e-11))
    g_q = beam_gain(quant, a)
    assert np.all(g_q <= g_ideal + 1e-9)
    assert np.all(g_q >= g_ps - 1e-9)


def test_subarray_ttd_monotone_in_resolution():
    arr = ArrayConfig.half_wavelength(64, FC)
    grid = FrequencyGrid(FC, 6e9, 16)
    p = PolarPoint(3.0, 0.5)
    a = nf_steering_matrix(arr, grid, p)
    min_gains = []
    for res in (50e-9, 5e-9, 0.5e-9, 0.05e-9):
        quant = subarray_ttd_weights(arr, grid, p, TtdConfig(n_units=8, resolution_s=res))
        min_gains.append(beam_gain(quant, a).min())
    assert all(g2 >= g1 - 1e-9 for g1, g2 in zip(min_gains, min_gains[1:]))


def test_ttd_config_validation():
    with pytest.raises(ValueError):
        TtdConfig(n_units=0)
    with pytest.raises(ValueError):
        TtdConfig(n_units=4, resolution_s=0.0, mode="quantized_subarray")
    with pytest.raises(ValueError):
        TtdConfig(n_units=4, resolution_s=1e-9, mode="bogus")
    arr = ArrayConfig.half_wavelength(8, FC)
    grid = FrequencyGrid(FC, 6e9, 4)
    with pytest.raises(ValueError):
        subarray_ttd_weights(arr, grid, PolarPoint(3.0, 0.0), TtdConfig(n_units=9, resolution_s=1e-9))
