import math

import numpy as np
import pytest

from nfisac import (
    C_MPS,
    ArrayConfig,
    ChannelParams,
    FrequencyGrid,
    PolarPoint,
    RegionOfInterest,
    beam_gain,
    beamformed_response,
    element_positions,
    ff_steering_matrix,
    focus_codeword,
    fraunhofer_distance,
    nf_steering_matrix,
    synthesize_user_channel,
)


def test_element_positions_symmetric():
    assert np.allclose(element_positions(ArrayConfig(3, 1.0)), [-1.0, 0.0, 1.0])
    assert np.allclose(element_positions(ArrayConfig(2, 0.0025)), [-0.00125, 0.00125])


def test_element_positions_paper_scale_aperture():
    arr = ArrayConfig(400, 0.0025)
    x = element_positions(arr)
    # 400 elements at nominal half-wavelength pitch span ~1 m
    assert x[-1] - x[0] == pytest.approx(0.9975, rel=1e-12)
    assert arr.aperture_m == pytest.approx(0.9975, rel=1e-12)
    assert abs(arr.aperture_m - 1.0) <= arr.spacing_m
    exact = ArrayConfig.half_wavelength(400, 60e9)
    assert exact.spacing_m == pytest.approx(0.0025, rel=1e-3)


def test_fraunhofer_distance_values():
    arr_1m = ArrayConfig(401, 0.0025)  # aperture exactly 1 m
    assert fraunhofer_distance(arr_1m, 60e9) == pytest.approx(2.0 / (C_MPS / 60e9), rel=1e-12)
    assert fraunhofer_distance(arr_1m, 60e9) == pytest.approx(400.2756, rel=1e-4)
    arr_01 = ArrayConfig(41, 0.0025)  # aperture 0.1 m
    assert fraunhofer_distance(arr_01, 60e9) == pytest.approx(fraunhofer_distance(arr_1m, 60e9) / 100, rel=1e-12)
    assert fraunhofer_distance(arr_1m, 120e9) == pytest.approx(2 * fraunhofer_distance(arr_1m, 60e9), rel=1e-12)


def test_frequency_grid_centered_on_carrier():
    grid = FrequencyGrid(60e9, 5e9, 512)
    f = grid.frequencies
    assert len(f) == 512
    assert np.all(np.diff(f) > 0)
    assert np.mean(f) == pytest.approx(60e9, rel=1e-15)
    assert f[0] == pytest.approx(60e9 - 2.5e9 + 0.5 * grid.delta_f, rel=1e-15)


def test_steering_unit_magnitude():
    arr = ArrayConfig.half_wavelength(32, 60e9)
    grid = FrequencyGrid(60e9, 6e9, 8)
    a_nf = nf_steering_matrix(arr, grid, PolarPoint(3.0, 0.4))
    a_ff = ff_steering_matrix(arr, grid, -0.7)
    for a in (a_nf, a_ff):
        assert a.shape == (8, 32)
        assert np.max(np.abs(np.abs(a) - 1.0)) < 1e-12


def test_ff_steering_broadside_is_all_ones():
    arr = ArrayConfig.half_wavelength(16, 60e9)
    grid = FrequencyGrid(60e9, 6e9, 4)
    assert np.allclose(ff_steering_matrix(arr, grid, 0.0), 1.0)


def test_ff_steering_phase_value():
    # element at x = lambda/2, f = fc, theta = 45 deg: phase = pi sin(45)
    fc = 60e9
    lam = C_MPS / fc
    arr = ArrayConfig(3, lam / 2)  # positions -lam/2, 0, lam/2
    grid = FrequencyGrid(fc, 1e6, 1)
    a = ff_steering_matrix(arr, grid, math.radians(45.0))
    expected = math.pi * math.sin(math.radians(45.0))
    assert np.angle(a[0, 2]) == pytest.approx(expected, abs=1e-12)


def test_nf_steering_rejects_bad_range():
    arr = ArrayConfig.half_wavelength(8, 60e9)
    grid = FrequencyGrid(60e9, 6e9, 2)
    with pytest.raises(ValueError):
        PolarPoint(-1.0, 0.0)
    with pytest.raises(ValueError):
        nf_steering_matrix(arr, grid, PolarPoint.far_field(0.3))


def test_nf_matches_ff_in_far_limit():
    # two-element array at 30 deg: phase difference approaches pi/2
    fc = 60e9
    arr = ArrayConfig.half_wavelength(2, fc)
    grid = FrequencyGrid(fc, 1e6, 1)
    r = 1e6
    a = nf_steering_matrix(arr, grid, PolarPoint(r, math.radians(30.0)))
    dphi = np.angle(a[0, 1] / a[0, 0])
    assert dphi == pytest.approx(math.pi / 2, abs=1e-6)


def test_nf_ff_phase_error_decreases_beyond_fraunhofer():
    fc = 60e9
    arr = ArrayConfig.half_wavelength(64, fc)
    grid = FrequencyGrid(fc, 6e9, 4)
    d_f = fraunhofer_distance(arr, fc)
    theta = 0.35
    errors = []
    for mult in (1, 3, 10, 30, 100):
        a_nf = nf_steering_matrix(arr, grid, PolarPoint(mult * d_f, theta))
        a_ff = ff_steering_matrix(arr, grid, theta)
        errors.append(np.max(np.abs(np.angle(a_nf * np.conj(a_ff)))))
    assert all(e1 > e2 for e1, e2 in zip(errors, errors[1:]))
    assert errors[-1] < 1e-2  # at 100x Fraunhofer the planar model is tight


def test_matched_focus_gain_is_n():
    fc = 60e9
    grid = FrequencyGrid(fc, 1e6, 1)  # single subcarrier sits exactly at fc
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(2, 257))
        arr = ArrayConfig.half_wavelength(n, fc)
        p = PolarPoint(rng.uniform(1.0, 50.0), rng.uniform(-1.2, 1.2))
        cw = focus_codeword(arr, fc, p)
        g = beam_gain(cw, nf_steering_matrix(arr, grid, p))
        assert abs(g[0] - n) < 1e-9 * n


def test_beamformed_response_shapes_and_bound():
    arr = ArrayConfig.half_wavelength(32, 60e9)
    grid = FrequencyGrid(60e9, 6e9, 8)
    a = nf_steering_matrix(arr, grid, PolarPoint(4.0, 0.1))
    rng = np.random.default_rng(3)
    w = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    w /= np.linalg.norm(w)
    g = beam_gain(w, a)
    assert g.shape == (8,)
    assert np.all(g <= 32 + 1e-9)  # Cauchy-Schwarz
    with pytest.raises(ValueError):
        beamformed_response(w[:5], a)
    with pytest.raises(ValueError):
        beamformed_response(np.ones((3, 32)) / math.sqrt(32), a)


def test_squint_peak_angle_follows_carrier_ratio():
    # planar beam at 45 deg: per-frequency peak satisfies sin(peak) = (fc/f) sin(45)
    fc = 60e9
    arr = ArrayConfig.half_wavelength(64, fc)
    f = 1.05 * fc
    cw = focus_codeword(arr, fc, PolarPoint.far_field(math.radians(45.0)))
    thetas = np.radians(np.arange(30.0, 60.0, 0.01))
    x = element_positions(arr)
    a = np.exp(2j * np.pi * f / C_MPS * np.outer(np.sin(thetas), x))
    gains = np.abs(a @ np.conj(cw.weights)) ** 2
    peak = math.degrees(thetas[np.argmax(gains)])
    assert peak == pytest.approx(math.degrees(math.asin(math.sin(math.radians(45.0)) / 1.05)), abs=0.02)
    assert peak == pytest.approx(42.33, abs=0.05)


def test_user_channel_rician_limits():
    fc = 60e9
    arr = ArrayConfig.half_wavelength(16, fc)
    grid = FrequencyGrid(fc, 6e9, 8)
    roi = RegionOfInterest(-1.0, 1.0, 2.0, 6.0)
    p = PolarPoint(4.0, 0.2)
    # no scatterers: pure LoS regardless of K
    params = ChannelParams(rician_k_db=10.0, n_scatterers=0)
    h = synthesize_user_channel(arr, grid, p, params, roi)
    assert np.allclose(h, nf_steering_matrix(arr, grid, p))
    # same seed twice: identical
    params = ChannelParams(rician_k_db=10.0, n_scatterers=4, seed=99)
    h1 = synthesize_user_channel(arr, grid, p, params, roi)
    h2 = synthesize_user_channel(arr, grid, p, params, roi)
    assert np.array_equal(h1, h2)


def test_user_channel_nlos_power_fraction():
    # K = 30 dB: NLoS carries ~1/1001 of the energy
    fc = 60e9
    arr = ArrayConfig.half_wavelength(8, fc)
    grid = FrequencyGrid(fc, 6e9, 4)
    roi = RegionOfInterest(-1.0, 1.0, 2.0, 6.0)
    p = PolarPoint(4.0, 0.0)
    params = ChannelParams(rician_k_db=30.0, n_scatterers=3)
    a_los = nf_steering_matrix(arr, grid, p)
    rng = np.random.default_rng(11)
    frac = []
    for _ in range(10_000):
        h = synthesize_user_channel(arr, grid, p, params, roi, rng)
        nlos = h - math.sqrt(1000.0 / 1001.0) * a_los
        frac.append(np.sum(np.abs(nlos) ** 2) / np.sum(np.abs(h) ** 2))
    assert np.mean(frac) == pytest.approx(1.0 / 1001.0, rel=0.1)


def test_user_channel_energy_independent_of_k():
    fc = 60e9
    arr = ArrayConfig.half_wavelength(8, fc)
    grid = FrequencyGrid(fc, 6e9, 4)
    roi = RegionOfInterest(-1.0, 1.0, 2.0, 6.0)
    p = PolarPoint(4.0, 0.0)
    total = arr.n_elements * grid.n_subcarriers
    for k_db in (0.0, 10.0, 30.0):
        params = ChannelParams(rician_k_db=k_db, n_scatterers=3)
        rng = np.random.default_rng(5)
        energies = [
            np.sum(np.abs(synthesize_user_channel(arr, grid, p, params, roi, rng)) ** 2)
            for _ in range(3000)
        ]
        assert np.mean(energies) == pytest.approx(total, rel=0.05)


def test_roi_grids():
    roi = RegionOfInterest(math.radians(-60), math.radians(60), 7.0, 15.0, math.radians(1.0), 0.5)
    assert len(roi.range_grid()) == 17
    assert len(roi.angle_grid(math.radians(20.0))) == 6
    full_fov = RegionOfInterest(math.radians(-90), math.radians(90), 7.0, 15.0)
    assert len(full_fov.angle_grid(math.radians(20.0))) == 9
