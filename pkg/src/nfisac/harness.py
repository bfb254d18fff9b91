"""Monte Carlo evaluation: detection sweeps, coverage maps, throughput replay.

Every random quantity derives from the scenario master seed through
``numpy.random.SeedSequence((master, stream, index, ...))`` with fixed
stream ids, so method comparisons share target draws and noise (paired
common random numbers), results are order-independent, and parallel
execution is bit-identical to sequential.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ArrayConfig,
    ChannelParams,
    FrequencyGrid,
    PolarPoint,
    RegionOfInterest,
    beamformed_response,
    steering_matrix,
    synthesize_user_channel,
)
from .codebook import (
    Codebook,
    Codeword,
    PgdParams,
    beam_broadening_codebook,
    fairness_codebook,
    ff_codebook,
    focus_codeword,
    nf_polar_codebook,
    partition_roi,
    polar_focal_distances,
)
from .combiner import (
    Combiner,
    EsWeighting,
    combined_combiner,
    crb_min_combiner,
    es_combiner,
    flat_combiner,
    mrc_combiner,
)
from .radar import (
    Frame,
    Gate,
    SensingTarget,
    calibrate_threshold,
    channel_quotient,
    detect,
    draw_clutter,
    generate_frame,
    range_doppler_map,
    symbol_duration,
    synthesize_echo,
)
from .ttd import TtdConfig, ideal_ttd_weights, subarray_ttd_weights

# seed-stream ids (entropy tuple = (master, stream, index[, sub-index]))
_STREAM_TARGET = 0
_STREAM_ENV = 1
_STREAM_DWELL = 2
_STREAM_CALIB = 3
_STREAM_USER = 4
_STREAM_USER_CHANNEL = 5
_STREAM_FRAME = 9

CODEBOOK_METHODS = ("ff", "nf_polar", "broadening", "fairness", "ttd")
COMBINER_METHODS = ("mrc", "es", "combined", "flat", "crb_min")


def derived_rng(master_seed: int, stream: int, *indices: int) -> np.random.Generator:
    """Generator for one (stream, index...) slot of the master seed."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, stream, *indices)))


@dataclass
class Scenario:
    """Full experiment description; every field has a desk-scale default."""

    array: ArrayConfig
    grid: FrequencyGrid
    roi: RegionOfInterest
    channel: ChannelParams
    n_symbols: int = 16
    cp_fraction: float = 0.125
    codebook_method: str = "fairness"
    codebook_size: int = 12
    n_rings: int = 2
    q_subapertures: int = 4
    pgd: PgdParams = field(default_factory=PgdParams)
    ttd: TtdConfig | None = None
    combiner_method: str = "mrc"
    mu: float = 0.5
    guard_bins: int = 1
    pfa_target: float = 0.01
    gate_bins: int = 1
    calibration_trials: int = 2000
    trials: int = 2000
    seed: int = 0
    velocity_span_mps: float = 0.0
    tx_power: float = 1.0
    pad_factor: int = 1


@dataclass
class TrialResult:
    """Outcome of one target's full codebook sweep."""

    truth: SensingTarget
    detected: bool
    est_range_m: float | None
    est_velocity_mps: float | None
    best_codeword: int | None
    n_false_alarms: int
    peak_values: np.ndarray


@dataclass
class MetricsReport:
    """Aggregated detection statistics with binomial 95% intervals."""

    method: str
    size: int
    trials: int
    pd: float
    pd_ci: float
    pfa: float
    pfa_ci: float
    range_mse_m2: float | None
    runtime_s: float = 0.0
    config_digest: str = ""


@dataclass
class CoverageMap:
    """Best subcarrier-summed gain over the codebook, per (theta, r) cell."""

    values: np.ndarray  # (n_theta, n_r)
    theta_centers_rad: np.ndarray
    r_centers_m: np.ndarray

    @property
    def min_value(self) -> float:
        return float(np.min(self.values))

    @property
    def max_value(self) -> float:
        return float(np.max(self.values))


def sample_target(
    roi: RegionOfInterest, rng: np.random.Generator, velocity_span_mps: float = 0.0
) -> SensingTarget:
    """Uniform target in the region: unit reflection with uniform phase,
    radial velocity uniform on +/- span/2 (0 by default)."""
    location = roi.sample_point(rng)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    velocity = rng.uniform(-velocity_span_mps / 2.0, velocity_span_mps / 2.0) if velocity_span_mps > 0 else 0.0
    return SensingTarget(location, amplitude=complex(math.cos(phase), math.sin(phase)), velocity_mps=velocity)


def sector_center_angles(roi: RegionOfInterest, size: int) -> np.ndarray:
    edges = np.linspace(roi.theta_min_rad, roi.theta_max_rad, size + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def _polar_foci(roi: RegionOfInterest, size: int, n_rings: int) -> list[PolarPoint]:
    n_angles = max(1, size // (n_rings + 1))
    step = roi.theta_span_rad / n_angles
    angles = roi.theta_min_rad + (np.arange(n_angles) + 0.5) * step
    distances = polar_focal_distances(n_rings, roi.r_min_m)
    foci = []
    for theta in angles:
        for r in distances:
            foci.append(PolarPoint.far_field(theta) if math.isinf(r) else PolarPoint(r, theta))
    return foci


def build_codebook(scenario: Scenario, method: str | None = None, size: int | None = None) -> Codebook:
    """Codebook of ``size`` beams over the scenario region, by method.

    ``nf_polar`` and ``ttd`` sizes round down to a multiple of
    (n_rings + 1) beams since they tile angle x distance; the other
    methods honor the size exactly.
    """
    method = method or scenario.codebook_method
    size = size or scenario.codebook_size
    if method not in CODEBOOK_METHODS:
        raise ValueError(f"unknown codebook method {method!r}")
    array, grid, roi = scenario.array, scenario.grid, scenario.roi
    if method == "ff":
        return ff_codebook(array, grid.fc_hz, sector_center_angles(roi, size))
    if method == "nf_polar":
        n_angles = max(1, size // (scenario.n_rings + 1))
        return nf_polar_codebook(array, grid.fc_hz, roi, roi.theta_span_rad / n_angles, scenario.n_rings)
    if method == "broadening":
        mid_r = 0.5 * (roi.r_min_m + roi.r_max_m)
        foci = [PolarPoint(mid_r, t) for t in sector_center_angles(roi, size)]
        return beam_broadening_codebook(array, grid.fc_hz, scenario.q_subapertures, foci)
    if method == "fairness":
        return fairness_codebook(array, grid, roi, size, scenario.pgd)
    # ttd: delay-hardware beams at the polar-codebook foci
    ttd = scenario.ttd or TtdConfig(n_units=array.n_elements, mode="ideal_full")
    cws = []
    for p in _polar_foci(roi, size, scenario.n_rings):
        if ttd.mode == "ideal_full":
            cws.append(ideal_ttd_weights(array, grid, p))
        else:
            cws.append(subarray_ttd_weights(array, grid, p, ttd))
    return Codebook(cws, roi=roi)


def design_channel(codeword: Codeword, array: ArrayConfig, grid: FrequencyGrid) -> np.ndarray:
    """Predicted two-way beamformed channel at the codeword's focus.

    This is the LoS design channel the digital filters are derived from:
    the squared one-way response, with no delay term (the delay only
    shifts the profile circularly).
    """
    if codeword.focus is None:
        raise ValueError("codeword needs focus metadata to derive its design channel")
    a = steering_matrix(array, grid, codeword.focus)
    b = beamformed_response(codeword, a)
    return b * b


def design_combiner(
    method: str,
    h_design: np.ndarray,
    weighting: EsWeighting,
    mu: float,
    noise_power: float,
    grid: FrequencyGrid,
) -> Combiner:
    if method == "mrc":
        return mrc_combiner(h_design)
    if method == "es":
        return es_combiner(h_design, weighting)
    if method == "combined":
        return combined_combiner(h_design, weighting, mu)
    if method == "flat":
        return flat_combiner(len(h_design))
    if method == "crb_min":
        return crb_min_combiner(h_design, noise_power, grid)
    raise ValueError(f"unknown combiner method {method!r}")


@dataclass
class SensingRig:
    """Prebuilt sweep state: codebook, per-beam filters and thresholds, frame."""

    scenario: Scenario
    codebook: Codebook
    combiners: list[Combiner]
    thresholds: np.ndarray
    frame: Frame
    method: str
    size: int

    @classmethod
    def build(
        cls,
        scenario: Scenario,
        method: str | None = None,
        size: int | None = None,
        combiner_method: str | None = None,
    ) -> "SensingRig":
        method = method or scenario.codebook_method
        size = size or scenario.codebook_size
        combiner_method = combiner_method or scenario.combiner_method
        codebook = build_codebook(scenario, method, size)
        weighting = EsWeighting(center_bin=0, guard_bins=scenario.guard_bins)
        combiners = []
        thresholds = np.empty(len(codebook))
        for i, cw in enumerate(codebook):
            h_d = design_channel(cw, scenario.array, scenario.grid)
            v = design_combiner(
                combiner_method, h_d, weighting, scenario.mu, scenario.channel.noise_power, scenario.grid
            )
            combiners.append(v)
            thresholds[i] = calibrate_threshold(
                v,
                scenario.n_symbols,
                scenario.channel.noise_power,
                scenario.pfa_target,
                scenario.calibration_trials,
                derived_rng(scenario.seed, _STREAM_CALIB, i),
                scenario.pad_factor,
            )
        frame = generate_frame(
            scenario.grid.n_subcarriers,
            scenario.n_symbols,
            scenario.cp_fraction,
            derived_rng(scenario.seed, _STREAM_FRAME, 0),
        )
        return cls(scenario, codebook, combiners, thresholds, frame, method, len(codebook))


def target_gate(scenario: Scenario, target: SensingTarget) -> Gate:
    """Expected (range, Doppler) bin window for the true target."""
    grid = scenario.grid
    pad = scenario.pad_factor
    k_bins = grid.n_subcarriers * pad
    q_bins = scenario.n_symbols * pad
    tau = 2.0 * target.location.range_m / 299_792_458.0
    k = int(round(tau * grid.bandwidth_hz * pad)) % k_bins
    t_o = symbol_duration(grid, scenario.cp_fraction)
    f_d = 2.0 * target.velocity_mps * grid.fc_hz / 299_792_458.0
    q = int(round(f_d * t_o * scenario.n_symbols * pad)) % q_bins
    return Gate(k, q, scenario.gate_bins, scenario.gate_bins)


def sweep_detections(rig: SensingRig, target: SensingTarget, trial_index: int):
    """One full codebook dwell sweep; returns (per-codeword reports, gate).

    The environment (clutter) is fixed across the sweep; each dwell draws
    fresh receiver noise and phase noise.
    """
    sc = rig.scenario
    env_rng = derived_rng(sc.seed, _STREAM_ENV, trial_index)
    clutter = draw_clutter([target], sc.channel, sc.roi, env_rng)
    reflectors = [target] + clutter
    steerings = [steering_matrix(sc.array, sc.grid, t.location) for t in reflectors]
    gate = target_gate(sc, target)
    reports = []
    for i, cw in enumerate(rig.codebook):
        responses = [(b := beamformed_response(cw, a), b) for a in steerings]
        dwell_rng = derived_rng(sc.seed, _STREAM_DWELL, trial_index, i)
        y = synthesize_echo(
            rig.frame, reflectors, cw, cw, sc.array, sc.grid, sc.channel, dwell_rng,
            responses=responses,
        )
        quotient = channel_quotient(y, rig.frame)
        ddmap = range_doppler_map(quotient, rig.combiners[i], sc.grid, sc.cp_fraction, sc.pad_factor)
        reports.append(detect(ddmap, rig.thresholds[i], [gate]))
    return reports, gate


def sensing_trial(rig: SensingRig, target: SensingTarget, trial_index: int) -> TrialResult:
    """Sweep the codebook over one target and fold the sweep into a TrialResult.

    Detected means any beam produced an in-gate detection; the estimate
    comes from the beam with the largest in-gate peak; false alarms count
    every off-gate detection across the sweep.
    """
    reports, _ = sweep_detections(rig, target, trial_index)
    detected = False
    best_value = -math.inf
    best = (None, None, None)
    n_false = 0
    peaks = np.zeros(len(reports))
    for i, rep in enumerate(reports):
        if rep.detections:
            peaks[i] = max(d.value for d in rep.detections)
        n_false += rep.n_false_alarms
        for d in rep.in_gate(0):
            detected = True
            if d.value > best_value:
                best_value = d.value
                best = (d.range_m, d.velocity_mps, i)
    return TrialResult(
        truth=target,
        detected=detected,
        est_range_m=best[0],
        est_velocity_mps=best[1],
        best_codeword=best[2],
        n_false_alarms=n_false,
        peak_values=peaks,
    )


def _trial_for_index(rig: SensingRig, index: int) -> TrialResult:
    target = sample_target(
        rig.scenario.roi,
        derived_rng(rig.scenario.seed, _STREAM_TARGET, index),
        rig.scenario.velocity_span_mps,
    )
    return sensing_trial(rig, target, index)


_WORKER_RIG: SensingRig | None = None


def _init_worker(rig: SensingRig) -> None:
    global _WORKER_RIG
    _WORKER_RIG = rig


def _worker_chunk(indices) -> list[TrialResult]:
    return [_trial_for_index(_WORKER_RIG, i) for i in indices]


def _worker_count(n_trials: int) -> int:
    raw = os.environ.get("NFISAC_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        threads = 1
    if threads == 0:
        threads = os.cpu_count() or 1
    return max(1, min(threads, n_trials))


def run_trials(rig: SensingRig, n_trials: int | None = None) -> list[TrialResult]:
    """Execute trials 0..n-1; parallel workers (NFISAC_THREADS) produce
    results identical to sequential execution."""
    n = n_trials if n_trials is not None else rig.scenario.trials
    workers = _worker_count(n)
    if workers == 1:
        return [_trial_for_index(rig, i) for i in range(n)]
    chunks = [list(range(lo, n, workers)) for lo in range(workers)]
    results: list[TrialResult | None] = [None] * n
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(rig,)) as pool:
        for chunk, outputs in zip(chunks, pool.map(_worker_chunk, chunks)):
            for i, res in zip(chunk, outputs):
                results[i] = res
    return results  # type: ignore[return-value]


def _binomial_ci(p: float, n: int) -> float:
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n) if n > 0 else 0.0


def detection_metrics(
    results: list[TrialResult], method: str = "", size: int = 0, runtime_s: float = 0.0, config_digest: str = ""
) -> MetricsReport:
    """Fold trial results into detection/false-alarm rates and range MSE.

    P_fa is the fraction of trials with at least one false alarm; the MSE
    is over detected trials only and reported absent when nothing was
    detected.
    """
    if not results:
        raise ValueError("results must be non-empty")
    n = len(results)
    pd = sum(r.detected for r in results) / n
    pfa = sum(r.n_false_alarms > 0 for r in results) / n
    sq_errors = [
        (r.est_range_m - r.truth.location.range_m) ** 2 for r in results if r.detected
    ]
    mse = float(np.mean(sq_errors)) if sq_errors else None
    return MetricsReport(
        method=method,
        size=size,
        trials=n,
        pd=pd,
        pd_ci=_binomial_ci(pd, n),
        pfa=pfa,
        pfa_ci=_binomial_ci(pfa, n),
        range_mse_m2=mse,
        runtime_s=runtime_s,
        config_digest=config_digest,
    )


def run_batch(
    scenario: Scenario,
    method: str | None = None,
    size: int | None = None,
    combiner_method: str | None = None,
    config_digest: str = "",
) -> MetricsReport:
    start = time.perf_counter()
    rig = SensingRig.build(scenario, method, size, combiner_method)
    results = run_trials(rig)
    label = combiner_method if combiner_method else (method or scenario.codebook_method)
    return detection_metrics(
        results,
        method=label,
        size=rig.size,
        runtime_s=time.perf_counter() - start,
        config_digest=config_digest,
    )


def coverage_map(
    codebook: Codebook,
    roi: RegionOfInterest,
    grid: FrequencyGrid,
    array: ArrayConfig,
    resolution: tuple[float, float] | None = None,
    chunk: int = 256,
) -> CoverageMap:
    """Per-cell best-beam gain map over the region.

    Each cell takes the max over codewords of the subcarrier-summed gain
    at the cell center.  Dimensions are ceil(span/step) per axis.
    """
    angle_step, range_step = resolution if resolution else (roi.angle_step_rad, roi.range_step_m)
    if angle_step <= 0 or range_step <= 0:
        raise ValueError("resolution steps must be > 0")
    n_theta = max(1, math.ceil(roi.theta_span_rad / angle_step - 1e-9))
    n_r = max(1, math.ceil((roi.r_max_m - roi.r_min_m) / range_step - 1e-9))
    thetas = roi.theta_min_rad + (np.arange(n_theta) + 0.5) * angle_step
    ranges = roi.r_min_m + (np.arange(n_r) + 0.5) * range_step
    tt, rr = np.meshgrid(thetas, ranges, indexing="ij")
    cells = np.column_stack([rr.ravel(), tt.ravel()])
    flat = [cw.weights for cw in codebook if not cw.is_frequency_dependent]
    freq_dep = [cw.weights for cw in codebook if cw.is_frequency_dependent]
    w_flat = np.conj(np.stack(flat)) if flat else None
    best = np.zeros(len(cells))
    for lo in range(0, len(cells), chunk):
        pts = cells[lo : lo + chunk]
        a = np.stack([steering_matrix(array, grid, PolarPoint(r, t)) for r, t in pts])
        if w_flat is not None:
            b = np.einsum("cmn,wn->wcm", a, w_flat)
            gains = np.sum(np.abs(b) ** 2, axis=2)
            best[lo : lo + len(pts)] = np.max(gains, axis=0)
        for w in freq_dep:
            b = np.einsum("cmn,mn->cm", a, np.conj(w))
            gains = np.sum(np.abs(b) ** 2, axis=1)
            best[lo : lo + len(pts)] = np.maximum(best[lo : lo + len(pts)], gains)
    return CoverageMap(best.reshape(n_theta, n_r), thetas, ranges)


def size_sweep(scenario: Scenario, sizes, methods) -> list[MetricsReport]:
    """Detection metrics per (method, size) under common random numbers."""
    sizes = list(sizes)
    if any(s < 1 or s > 1000 for s in sizes):
        raise ValueError("sizes must lie in [1, 1000]")
    reports = []
    for method in methods:
        for size in sizes:
            reports.append(run_batch(scenario, method=method, size=size))
    return reports


def spectral_efficiency(weights, h_user: np.ndarray, noise_power: float, tx_power: float) -> float:
    """Mean log2(1 + P |w^H H_m|^2 / sigma^2) over subcarriers (bits/s/Hz)."""
    b = beamformed_response(weights, h_user)
    snr = tx_power * np.abs(b) ** 2 / noise_power
    return float(np.mean(np.log2(1.0 + snr)))


def default_user_grid(roi: RegionOfInterest, n_per_axis: int = 15) -> list[PolarPoint]:
    """Uniform rectangle of candidate users mapped into polar coordinates,
    keeping the points that land inside the region."""
    x_max = roi.r_max_m * math.sin(roi.theta_max_rad) * 0.95
    x = np.linspace(-x_max, x_max, n_per_axis)
    z = np.linspace(roi.r_min_m * 1.02, roi.r_max_m * 0.98, n_per_axis)
    users = []
    for zi in z:
        for xi in x:
            r = math.hypot(xi, zi)
            theta = math.atan2(xi, zi)
            if roi.r_min_m <= r <= roi.r_max_m and roi.theta_min_rad <= theta <= roi.theta_max_rad:
                users.append(PolarPoint(r, theta))
    return users


def e2e_throughput(scenario: Scenario, users: list[PolarPoint]) -> list[dict]:
    """Sensing-aided link adaptation replay for each user.

    The codebook sweep senses the user; if any beam raises an
    above-threshold peak, communication focuses at the estimated range and
    the detecting beam's sector angle (a false alarm that supplants the
    true peak steers the focus to the wrong place).  Undetected users fall
    back to the planar beam nearest their direction.  Upper and lower
    bounds (focus at truth / always planar) are evaluated per user.
    """
    rows: list[dict] = []
    if not users:
        return rows
    rig = SensingRig.build(scenario)
    sc = scenario
    beam_angles = np.array([cw.focus.angle_rad for cw in rig.codebook])
    min_range = 0.1 * sc.roi.r_min_m
    for i, user in enumerate(users):
        phase = derived_rng(sc.seed, _STREAM_USER, i).uniform(0.0, 2.0 * math.pi)
        target = SensingTarget(user, amplitude=complex(math.cos(phase), math.sin(phase)))
        h_user = synthesize_user_channel(
            sc.array, sc.grid, user, sc.channel, sc.roi, derived_rng(sc.seed, _STREAM_USER_CHANNEL, i)
        )
        reports, _ = sweep_detections(rig, target, i)
        detected = any(rep.in_gate(0) for rep in reports)
        best_det, best_cw = None, None
        for cw_idx, rep in enumerate(reports):
            for d in rep.detections:
                if best_det is None or d.value > best_det.value:
                    best_det, best_cw = d, cw_idx
        nearest = int(np.argmin(np.abs(beam_angles - user.angle_rad)))
        ff_beam = focus_codeword(sc.array, sc.grid.fc_hz, PolarPoint.far_field(beam_angles[nearest]))
        if best_det is not None:
            est = PolarPoint(max(best_det.range_m, min_range), rig.codebook[best_cw].focus.angle_rad)
            beam = focus_codeword(sc.array, sc.grid.fc_hz, est)
            mode = "nf_focus"
        else:
            beam = ff_beam
            mode = "ff_fallback"
        upper_beam = focus_codeword(sc.array, sc.grid.fc_hz, user)
        rows.append(
            {
                "user_r": user.range_m,
                "user_theta_deg": math.degrees(user.angle_rad),
                "detected": detected,
                "mode": mode,
                "se_bits": spectral_efficiency(beam, h_user, sc.channel.noise_power, sc.tx_power),
                "se_upper": spectral_efficiency(upper_beam, h_user, sc.channel.noise_power, sc.tx_power),
                "se_lower": spectral_efficiency(ff_beam, h_user, sc.channel.noise_power, sc.tx_power),
            }
        )
    return rows
