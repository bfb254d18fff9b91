import math

import numpy as np
import pytest

from nfisac import (
    ArrayConfig,
    Codebook,
    Codeword,
    FrequencyGrid,
    PgdParams,
    PolarPoint,
    RegionOfInterest,
    beam_broadening_codebook,
    beam_gain,
    element_positions,
    fairness_codebook,
    ff_codebook,
    ff_steering_matrix,
    focus_codeword,
    load_codebook,
    nf_polar_codebook,
    nf_steering_matrix,
    partition_roi,
    pgd_codeword,
    point_gains,
    polar_focal_distances,
    project_unit_modulus,
    save_codebook,
    smooth_min_objective,
    steering_cache,
)
from nfisac.codebook import beam_broadening_codeword

FC = 60e9


def desk_roi():
    return RegionOfInterest(math.radians(-60), math.radians(60), 2.0, 6.0, math.radians(1.0), 0.5)


def test_codeword_unit_modulus_enforced():
    w = np.ones(4, dtype=complex) / 2.0
    Codeword(w)  # 1/sqrt(4) entries are feasible
    with pytest.raises(ValueError):
        Codeword(np.ones(4, dtype=complex))


def test_ff_codebook_matched_gain_and_spacing():
    arr = ArrayConfig.half_wavelength(32, FC)
    grid = FrequencyGrid(FC, 1e6, 1)
    angles = np.radians(np.linspace(-60, 60, 90))
    cb = ff_codebook(arr, FC, angles)
    assert cb.size == 90
    assert np.diff(np.degrees(angles))[0] == pytest.approx(120.0 / 89, rel=1e-12)
    for cw in (cb[0], cb[44], cb[89]):
        g = beam_gain(cw, ff_steering_matrix(arr, grid, cw.focus.angle_rad))
        assert g[0] == pytest.approx(32.0, rel=1e-12)
    with pytest.raises(ValueError):
        ff_codebook(arr, FC, [])


def test_ff_codebook_single_angle_zero_is_uniform():
    arr = ArrayConfig.half_wavelength(16, FC)
    cb = ff_codebook(arr, FC, [0.0])
    assert np.allclose(cb[0].weights, cb[0].weights[0])


def test_polar_focal_distances():
    d = polar_focal_distances(1, 7.0)
    assert d[0] == pytest.approx(7.0) and math.isinf(d[1])
    d = polar_focal_distances(20, 7.0)
    assert len(d) == 21  # matches the 21-distance grid
    inv = 1.0 / d
    gaps = np.diff(inv[::-1])  # includes the far-field point at 1/r = 0
    assert np.allclose(gaps, gaps[0])
    with pytest.raises(ValueError):
        polar_focal_distances(0, 7.0)
    with pytest.raises(ValueError):
        polar_focal_distances(3, -1.0)


def test_nf_polar_codebook_counts_and_gain():
    arr = ArrayConfig.half_wavelength(32, FC)
    fov = RegionOfInterest(math.radians(-90), math.radians(90), 7.0, 15.0)
    cb = nf_polar_codebook(arr, FC, fov, math.radians(20.0), 20)
    assert cb.size == 9 * 21
    grid1 = FrequencyGrid(FC, 1e6, 1)
    for cw in (cb[0], cb[40], cb[-1]):
        if cw.focus.is_far_field:
            a = ff_steering_matrix(arr, grid1, cw.focus.angle_rad)
        else:
            a = nf_steering_matrix(arr, grid1, cw.focus)
        assert beam_gain(cw, a)[0] == pytest.approx(32.0, rel=1e-9)
    tiny = nf_polar_codebook(arr, FC, fov, math.radians(180.0), 1)
    assert tiny.size == 2


def test_nf_polar_far_ring_equals_ff_codeword():
    arr = ArrayConfig.half_wavelength(32, FC)
    fov = RegionOfInterest(math.radians(-90), math.radians(90), 7.0, 15.0)
    cb = nf_polar_codebook(arr, FC, fov, math.radians(20.0), 2)
    far = [cw for cw in cb if cw.focus.is_far_field]
    for cw in far:
        ff = focus_codeword(arr, FC, PolarPoint.far_field(cw.focus.angle_rad))
        assert np.max(np.abs(np.angle(cw.weights * np.conj(ff.weights)))) < 1e-9


def test_beam_broadening_degenerate_and_widening():
    arr = ArrayConfig.half_wavelength(64, FC)
    p_ff = PolarPoint.far_field(0.0)
    base = focus_codeword(arr, FC, p_ff)
    cw1 = beam_broadening_codeword(arr, FC, p_ff, 1)
    assert np.allclose(cw1.weights, base.weights)
    p_nf = PolarPoint(4.0, 0.2)
    cw1_nf = beam_broadening_codeword(arr, FC, p_nf, 1)
    assert np.allclose(cw1_nf.weights, focus_codeword(arr, FC, p_nf).weights)

    def width_3db(cw):
        thetas = np.radians(np.arange(-30.0, 30.0, 0.01))
        x = element_positions(arr)
        a = np.exp(2j * np.pi * FC / 299792458.0 * np.outer(np.sin(thetas), x))
        gains = np.abs(a @ np.conj(cw.weights)) ** 2
        above = gains >= gains.max() / 2
        return math.degrees(thetas[above].max() - thetas[above].min()), gains

    w1, _ = width_3db(cw1)
    cw4 = beam_broadening_codeword(arr, FC, p_ff, 4)
    w4, g4 = width_3db(cw4)
    assert 2.5 <= w4 / w1 <= 6.0  # ~4x per-subcarrier widening for q=4
    # the focus stays inside the widened mainlobe
    grid1 = FrequencyGrid(FC, 1e6, 1)
    g_focus = beam_gain(cw4, ff_steering_matrix(arr, grid1, 0.0))[0]
    assert g_focus >= g4.max() / 2
    with pytest.raises(ValueError):
        beam_broadening_codeword(arr, FC, p_ff, 65)
    cb = beam_broadening_codebook(arr, FC, 4, [p_ff, p_nf])
    assert cb.size == 2 and cb.method_tag == "broadening"


def test_partition_roi_sectors_and_grids():
    roi = RegionOfInterest(math.radians(-60), math.radians(60), 7.0, 15.0, math.radians(1.0), 0.5)
    sectors = partition_roi(roi, 3)
    bounds = [(math.degrees(s.theta_min_rad), math.degrees(s.theta_max_rad)) for s in sectors]
    assert np.allclose(bounds, [(-60, -20), (-20, 20), (20, 60)])
    for s in sectors:
        assert s.points.shape == (40 * 17, 2)
    # points are disjoint across sectors
    all_pts = np.vstack([s.points for s in sectors])
    assert len(np.unique(all_pts, axis=0)) == len(all_pts)


def test_smooth_min_objective_values():
    arr = ArrayConfig.half_wavelength(8, FC)
    grid = FrequencyGrid(FC, 6e9, 4)
    roi = desk_roi()
    pts = np.array([[4.0, 0.1]])
    cache = steering_cache(arr, grid, pts)
    w = focus_codeword(arr, FC, PolarPoint(4.0, 0.1)).weights
    g = point_gains(w, cache)
    for beta in (0.01, 1.0, 100.0):
        val, _ = smooth_min_objective(w, cache, beta)
        assert val == pytest.approx(g[0], rel=1e-12)  # single point: exact

    # two equal gains: F = g - ln(2)/beta
    cache2 = np.concatenate([cache, cache])
    for beta in (0.5, 5.0):
        val, _ = smooth_min_objective(w, cache2, beta)
        assert val == pytest.approx(g[0] - math.log(2.0) / beta, rel=1e-9)


def test_smooth_min_lower_bounds_min_and_sharpens():
    rng = np.random.default_rng(0)
    arr = ArrayConfig.half_wavelength(16, FC)
    grid = FrequencyGrid(FC, 6e9, 8)
    pts = np.column_stack([rng.uniform(2, 6, 25), rng.uniform(-1, 1, 25)])
    cache = steering_cache(arr, grid, pts)
    for trial in range(5):
        w = project_unit_modulus(rng.standard_normal(16) + 1j * rng.standard_normal(16))
        g_min = point_gains(w, cache).min()
        last_gap = None
        for beta in (0.01, 1.0, 100.0):
            val, _ = smooth_min_objective(w, cache, beta)
            assert val <= g_min + 1e-12
            gap = g_min - val
            if last_gap is not None:
                assert gap <= last_gap + 1e-12
            last_gap = gap


def test_smooth_min_overflow_guarded():
    arr = ArrayConfig.half_wavelength(8, FC)
    grid = FrequencyGrid(FC, 6e9, 4)
    pts = np.array([[2.0, -0.5], [6.0, 0.5]])
    cache = steering_cache(arr, grid, pts)
    w = project_unit_modulus(np.ones(8, dtype=complex))
    val, grad = smooth_min_objective(w, cache, 1e9)
    assert math.isfinite(val) and np.all(np.isfinite(grad))


def test_smooth_min_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    arr = ArrayConfig.half_wavelength(16, FC)
    grid = FrequencyGrid(FC, 6e9, 8)
    for trial in range(50):
        pts = np.column_stack([rng.uniform(2, 6, 20), rng.uniform(-1, 1, 20)])
        cache = steering_cache(arr, grid, pts)
        w = project_unit_modulus(rng.standard_normal(16) + 1j * rng.standard_normal(16))
        beta = 10.0 / np.median(point_gains(w, cache))
        _, grad = smooth_min_objective(w, cache, beta)
        fd = np.zeros(16, dtype=complex)
        eps = 1e-6
        for k in range(16):
            for part, unit in ((0, 1.0), (1, 1j)):
                vp, _ = smooth_min_objective(w + eps * unit * np.eye(16)[k], cache, beta)
                vm, _ = smooth_min_objective(w - eps * unit * np.eye(16)[k], cache, beta)
                d = (vp - vm) / (2 * eps)
                fd[k] += d if part == 0 else 1j * d
        assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) < 1e-5


def test_project_unit_modulus():
    w = np.array([3.0, -4.0j])
    p = project_unit_modulus(w)
    assert np.allclose(p, [1 / math.sqrt(2), -1j / math.sqrt(2)])
    assert np.allclose(project_unit_modulus(p), p)
    # zero entries take phase 0
    p0 = project_unit_modulus(np.array([0.0, 1.0j]))
    assert p0[0] == pytest.approx(1 / math.sqrt(2))
    # nearest feasible point per entry
    rng = np.random.default_rng(1)
    z = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    proj = project_unit_modulus(z)
    for k in range(8):
        alts = proj[k] * np.exp(1j * rng.uniform(-np.pi, np.pi, 50))
        assert np.all(np.abs(z[k] - proj[k]) <= np.abs(z[k] - alts) + 1e-12)


def test_pgd_trace_monotone_and_improves():
    arr = ArrayConfig.half_wavelength(32, FC)
    grid = FrequencyGrid(FC, 6e9, 8)
    roi = desk_roi()
    sector = partition_roi(roi, 6)[2]
    cache = steering_cache(arr, grid, sector.points)
    init = focus_codeword(arr, FC, PolarPoint.far_field(sector.center_angle_rad))
    cw, trace = pgd_codeword(init, cache, PgdParams(max_iters=150))
    assert np.all(np.diff(trace) >= -1e-12)
    assert trace[-1] >= trace[0]
    g_init = point_gains(init.weights, cache).min()
    g_final = point_gains(cw.weights, cache).min()
    assert g_final > g_init


def test_pgd_zero_iters_returns_init():
    arr = ArrayConfig.half_wavelength(16, FC)
    grid = FrequencyGrid(FC, 6e9, 4)
    pts = np.array([[4.0, 0.0], [5.0, 0.3]])
    cache = steering_cache(arr, grid, pts)
    init = focus_codeword(arr, FC, PolarPoint.far_field(0.0))
    cw, trace = pgd_codeword(init, cache, PgdParams(max_iters=0))
    assert np.allclose(cw.weights, init.weights)
    assert len(trace) == 1


def test_pgd_single_point_beats_carrier_only_focus():
    # optimizing the subcarrier sum at one point beats the focus beam's
    # carrier-only gain N
    arr = ArrayConfig.half_wavelength(32, FC)
    grid = FrequencyGrid(FC, 6e9, 8)
    p = PolarPoint(3.0, 0.4)
    cache = steering_cache(arr, grid, np.array([[p.range_m, p.angle_rad]]))
    init = focus_codeword(arr, FC, PolarPoint.far_field(p.angle_rad))
    cw, _ = pgd_codeword(init, cache, PgdParams(max_iters=200))
    assert point_gains(cw.weights, cache)[0] >= arr.n_elements


def test_fairness_codebook_properties():
    arr = ArrayConfig.half_wavelength(32, FC)
    grid = FrequencyGrid(FC, 6e9, 8)
    roi = desk_roi()
    cb = fairness_codebook(arr, grid, roi, 4, PgdParams(max_iters=60))
    assert cb.size == 4
    assert all(abs(np.abs(cw.weights) * math.sqrt(32) - 1).max() < 1e-12 for cw in cb)
    # determinism
    cb2 = fairness_codebook(arr, grid, roi, 4, PgdParams(max_iters=60))
    for a, b in zip(cb, cb2):
        assert np.array_equal(a.weights, b.weights)


def test_codebook_json_roundtrip(tmp_path):
    arr = ArrayConfig.half_wavelength(8, FC)
    cb = ff_codebook(arr, FC, np.radians([-30.0, 0.0, 30.0]))
    path = tmp_path / "cb.json"
    save_codebook(cb, path)
    loaded = load_codebook(path)
    assert loaded.size == cb.size
    assert loaded.method_tag == "ff"
    for a, b in zip(cb, loaded):
        assert np.allclose(a.weights, b.weights)
        assert a.focus.is_far_field == b.focus.is_far_field
    import json

    doc = json.loads(path.read_text())
    assert set(doc) == {"n_elements", "method", "codewords"}
    assert set(doc["codewords"][0]) == {"focus", "weights"}
    assert set(doc["codewords"][0]["focus"]) == {"r", "theta_deg"}
    assert doc["codewords"][0]["focus"]["r"] is None
