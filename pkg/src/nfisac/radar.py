"""Monostatic OFDM radar chain: frames, echoes, delay-Doppler maps, detection.

The sensing receiver divides each received symbol by the known transmit
symbol, combines subcarriers with a digital filter, and applies an inverse
DFT across subcarriers (delay/range) and a DFT across symbols (Doppler/
velocity).  Thresholds are calibrated empirically on noise-only maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    C_MPS,
    ArrayConfig,
    ChannelParams,
    FrequencyGrid,
    PolarPoint,
    RegionOfInterest,
    beamformed_response,
    steering_matrix,
)
from .combiner import Combiner


@dataclass
class Frame:
    """Unit-modulus data symbols, subcarriers x OFDM symbols."""

    symbols: np.ndarray
    cp_fraction: float = 0.125

    def __post_init__(self) -> None:
        self.symbols = np.asarray(self.symbols, dtype=complex)
        if self.symbols.ndim != 2:
            raise ValueError("symbols must be 2-D (M, L)")
        if self.cp_fraction < 0:
            raise ValueError("cp_fraction must be >= 0")

    @property
    def n_subcarriers(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[1]

    def symbol_duration_s(self, bandwidth_hz: float) -> float:
        """OFDM symbol duration including cyclic prefix: (1 + cp) M / B."""
        return (1.0 + self.cp_fraction) * self.n_subcarriers / bandwidth_hz


def symbol_duration(grid: FrequencyGrid, cp_fraction: float) -> float:
    return (1.0 + cp_fraction) * grid.n_subcarriers / grid.bandwidth_hz


@dataclass
class SensingTarget:
    """Point reflector: location, complex reflection coefficient, radial velocity."""

    location: PolarPoint
    amplitude: complex = 1.0 + 0j
    velocity_mps: float = 0.0


@dataclass
class DelayDopplerMap:
    """Nonnegative power map over (delay bin k, Doppler bin q)."""

    values: np.ndarray
    range_per_bin_m: float
    velocity_per_bin_mps: float

    @property
    def n_range_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_doppler_bins(self) -> int:
        return self.values.shape[1]

    def range_of_bin(self, k: float) -> float:
        return k * self.range_per_bin_m

    def velocity_of_bin(self, q: float) -> float:
        n = self.n_doppler_bins
        signed = (q + n // 2) % n - n // 2
        return signed * self.velocity_per_bin_mps


@dataclass(frozen=True)
class Gate:
    """Expected bin window for one hypothesized target (circular membership)."""

    range_bin: int
    doppler_bin: int
    range_halfwidth: int = 1
    doppler_halfwidth: int = 1

    def contains(self, k: int, q: int, n_range: int, n_doppler: int) -> bool:
        dk = abs((k - self.range_bin) % n_range)
        dk = min(dk, n_range - dk)
        dq = abs((q - self.doppler_bin) % n_doppler)
        dq = min(dq, n_doppler - dq)
        return dk <= self.range_halfwidth and dq <= self.doppler_halfwidth


@dataclass
class Detection:
    """One above-threshold local maximum with refined physical estimates."""

    range_bin: int
    doppler_bin: int
    value: float
    range_m: float
    velocity_mps: float
    gate_index: int  # index of the first matching gate, -1 for a false alarm

    @property
    def is_false_alarm(self) -> bool:
        return self.gate_index < 0


@dataclass
class DetectionReport:
    detections: list[Detection] = field(default_factory=list)
    threshold: float = 0.0

    @property
    def n_false_alarms(self) -> int:
        return sum(1 for d in self.detections if d.is_false_alarm)

    def in_gate(self, gate_index: int) -> list[Detection]:
        return [d for d in self.detections if d.gate_index == gate_index]


def generate_frame(
    n_subcarriers: int, n_symbols: int, cp_fraction: float, rng: np.random.Generator
) -> Frame:
    """I.i.d. 4-phase unit-modulus symbols, deterministic per generator state."""
    if n_subcarriers < 1 or n_symbols < 1:
        raise ValueError("n_subcarriers and n_symbols must be >= 1")
    quad = rng.integers(0, 4, size=(n_subcarriers, n_symbols))
    return Frame(np.exp(1j * (math.pi / 2) * quad), cp_fraction)


def draw_clutter(
    targets: list[SensingTarget],
    params: ChannelParams,
    roi: RegionOfInterest,
    rng: np.random.Generator,
) -> list[SensingTarget]:
    """Static scatterer pseudo-targets realizing the Rician LoS/NLoS echo split.

    Total clutter echo power is total target power divided by the linear
    K-factor, spread over ``params.n_scatterers`` points drawn uniformly in
    the region.  No targets means no clutter.
    """
    if params.n_scatterers == 0 or not targets:
        return []
    p_clutter = sum(abs(t.amplitude) ** 2 for t in targets) / params.rician_k_linear
    scale = math.sqrt(p_clutter / params.n_scatterers)
    out = []
    for _ in range(params.n_scatterers):
        p_s = roi.sample_point(rng)
        g_s = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
        out.append(SensingTarget(p_s, amplitude=scale * g_s, velocity_mps=0.0))
    return out


def synthesize_echo(
    frame: Frame,
    targets: list[SensingTarget],
    tx,
    rx,
    array: ArrayConfig,
    grid: FrequencyGrid,
    params: ChannelParams,
    rng: np.random.Generator,
    clutter_roi: RegionOfInterest | None = None,
    responses: list[tuple[np.ndarray, np.ndarray]] | None = None,
) -> np.ndarray:
    """Received subcarrier x symbol matrix through the Tx and Rx beams.

    Each reflector contributes
    ``alpha b_tx,m b_rx,m exp(-j 2 pi f_m 2 r / c) exp(+j 2 pi f_D l T_o)``
    per symbol, with round-trip Doppler f_D = 2 v fc / c.  A common
    per-symbol phase-noise rotation multiplies all reflections, and white
    circular Gaussian noise of power ``params.noise_power`` is added.  With
    ``clutter_roi`` set, Rician clutter pseudo-targets are drawn first.

    ``responses`` may carry precomputed per-target (b_tx, b_rx) pairs to
    avoid recomputing steering when sweeping many beams over one scene; it
    must then match ``targets`` one-to-one.
    """
    m, l = frame.n_subcarriers, frame.n_symbols
    if m != grid.n_subcarriers:
        raise ValueError("frame and grid subcarrier counts differ")
    if clutter_roi is not None:
        if responses is not None:
            raise ValueError("precomputed responses cannot be combined with clutter_roi")
        targets = list(targets) + draw_clutter(targets, params, clutter_roi, rng)
    if responses is not None and len(responses) != len(targets):
        raise ValueError("responses must match targets one-to-one")
    t_o = frame.symbol_duration_s(grid.bandwidth_hz)
    f = np.asarray(grid.frequencies)
    sym_idx = np.arange(l)
    echo = np.zeros((m, l), dtype=complex)
    for ti, t in enumerate(targets):
        if responses is not None:
            b_tx, b_rx = responses[ti]
        else:
            a = steering_matrix(array, grid, t.location)
            b_tx = beamformed_response(tx, a)
            b_rx = b_tx if rx is tx else beamformed_response(rx, a)
        tau = 2.0 * t.location.range_m / C_MPS
        f_d = 2.0 * t.velocity_mps * grid.fc_hz / C_MPS
        fast = t.amplitude * b_tx * b_rx * np.exp(-2j * np.pi * f * tau)
        slow = np.exp(2j * np.pi * f_d * t_o * sym_idx)
        echo += np.outer(fast, slow)
    phase_noise = rng.normal(0.0, math.radians(params.phase_noise_deg), size=l)
    echo = echo * np.exp(1j * phase_noise)[None, :] * frame.symbols
    noise = rng.standard_normal((m, l)) + 1j * rng.standard_normal((m, l))
    return echo + math.sqrt(params.noise_power / 2.0) * noise


def channel_quotient(received: np.ndarray, frame: Frame) -> np.ndarray:
    """Per-cell symbol removal G = Y / S (symbols are unit modulus)."""
    y = np.asarray(received)
    if y.shape != frame.symbols.shape:
        raise ValueError("received and frame shapes differ")
    return y / frame.symbols


def range_doppler_map(
    quotient: np.ndarray,
    combiner,
    grid: FrequencyGrid,
    cp_fraction: float = 0.125,
    pad_factor: int = 1,
) -> DelayDopplerMap:
    """2D transform of the combined quotient into (delay, Doppler) power.

    Z[k, q] = |sum_l sum_m conj(v_m) G[m, l] e^{+j 2 pi m k / K} e^{-j 2 pi l q / Q}|^2
    with K = M * pad_factor, Q = L * pad_factor.  Bin k maps to range
    k c / (2 B pad_factor); bin q, after the signed wrap, to velocity
    q c / (2 fc L T_o pad_factor).
    """
    g = np.asarray(quotient, dtype=complex)
    v = combiner.values if isinstance(combiner, Combiner) else np.asarray(combiner, dtype=complex)
    if g.shape[0] != len(v):
        raise ValueError("combiner length must match subcarrier count")
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    m, l = g.shape
    k_bins, q_bins = m * pad_factor, l * pad_factor
    weighted = np.conj(v)[:, None] * g
    along_delay = k_bins * np.fft.ifft(weighted, n=k_bins, axis=0)
    spectrum = np.fft.fft(along_delay, n=q_bins, axis=1)
    t_o = symbol_duration(grid, cp_fraction)
    return DelayDopplerMap(
        values=np.abs(spectrum) ** 2,
        range_per_bin_m=C_MPS / (2.0 * grid.bandwidth_hz * pad_factor),
        velocity_per_bin_mps=C_MPS / (2.0 * grid.fc_hz * l * t_o * pad_factor),
    )


def calibrate_threshold(
    combiner,
    n_symbols: int,
    noise_power: float,
    pfa_target: float,
    n_trials: int,
    rng: np.random.Generator,
    pad_factor: int = 1,
) -> float:
    """Empirical (1 - pfa_target) quantile of the per-map maximum over
    noise-only delay-Doppler maps.

    Unit-modulus symbol division leaves noise statistics unchanged, so the
    maps are built directly from white noise.  Deterministic per generator
    state.
    """
    if not 0 < pfa_target < 1:
        raise ValueError("pfa_target must lie in (0, 1)")
    if n_trials * pfa_target < 1:
        raise ValueError("n_trials too small to resolve pfa_target")
    v = combiner.values if isinstance(combiner, Combiner) else np.asarray(combiner, dtype=complex)
    m = len(v)
    k_bins, q_bins = m * pad_factor, n_symbols * pad_factor
    scale = math.sqrt(noise_power / 2.0)
    maxima = np.empty(n_trials)
    for i in range(n_trials):
        noise = rng.standard_normal((m, n_symbols)) + 1j * rng.standard_normal((m, n_symbols))
        weighted = np.conj(v)[:, None] * (scale * noise)
        spectrum = np.fft.fft(k_bins * np.fft.ifft(weighted, n=k_bins, axis=0), n=q_bins, axis=1)
        maxima[i] = np.max(np.abs(spectrum) ** 2)
    return float(np.quantile(maxima, 1.0 - pfa_target, method="higher"))


def _local_maxima(z: np.ndarray) -> np.ndarray:
    """Boolean mask of circular 8-neighborhood local maxima.

    Plateau ties go to the lexicographically smallest (k, q) cell.
    """
    k_bins, q_bins = z.shape
    lex = np.arange(k_bins * q_bins).reshape(k_bins, q_bins)
    keep = np.ones_like(z, dtype=bool)
    for dk in (-1, 0, 1):
        for dq in (-1, 0, 1):
            if dk == 0 and dq == 0:
                continue
            zn = np.roll(np.roll(z, dk, axis=0), dq, axis=1)
            ln = np.roll(np.roll(lex, dk, axis=0), dq, axis=1)
            keep &= (z > zn) | ((z == zn) & (lex < ln))
    return keep


def estimate_offsets(z: np.ndarray, k: int, q: int) -> tuple[float, float]:
    """Sub-bin offsets by 3-point parabolic interpolation of log power.

    Performed independently per axis with circular neighbors, clamped to
    +/- 0.5 bin; skipped (offset 0) whenever a neighbor is nonpositive or
    the curvature vanishes.
    """

    def axis_offset(zm: float, z0: float, zp: float) -> float:
        if z0 <= 0 or zm <= 0 or zp <= 0:
            return 0.0
        lm, l0, lp = math.log(zm), math.log(z0), math.log(zp)
        denom = lm - 2.0 * l0 + lp
        if denom >= 0 or not math.isfinite(denom):
            return 0.0
        delta = 0.5 * (lm - lp) / denom
        return max(-0.5, min(0.5, delta))

    k_bins, q_bins = z.shape
    dk = axis_offset(z[(k - 1) % k_bins, q], z[k, q], z[(k + 1) % k_bins, q])
    dq = axis_offset(z[k, (q - 1) % q_bins], z[k, q], z[k, (q + 1) % q_bins])
    return dk, dq


def estimate_target(ddmap: DelayDopplerMap, range_bin: int, doppler_bin: int) -> tuple[float, float]:
    """Refined (range_m, velocity_mps) for a local-maximum cell."""
    dk, dq = estimate_offsets(ddmap.values, range_bin, doppler_bin)
    return (
        ddmap.range_of_bin(range_bin + dk),
        ddmap.velocity_of_bin(doppler_bin + dq),
    )


def detect(ddmap: DelayDopplerMap, threshold: float, gates: list[Gate] | tuple = ()) -> DetectionReport:
    """Extract above-threshold local maxima and assign them to gates.

    Each detection is tagged with the index of the first gate containing
    it, or -1 (false alarm).  Detections are ordered by decreasing value,
    ties by (k, q).
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    z = ddmap.values
    mask = (z > threshold) & _local_maxima(z)
    ks, qs = np.nonzero(mask)
    order = np.lexsort((qs, ks, -z[ks, qs]))
    report = DetectionReport(threshold=threshold)
    for i in order:
        k, q = int(ks[i]), int(qs[i])
        gate_index = -1
        for gi, gate in enumerate(gates):
            if gate.contains(k, q, z.shape[0], z.shape[1]):
                gate_index = gi
                break
        r_m, v_mps = estimate_target(ddmap, k, q)
        report.detections.append(Detection(k, q, float(z[k, q]), r_m, v_mps, gate_index))
    return report


def export_map_csv(ddmap: DelayDopplerMap, path) -> None:
    """Full map dump with header ``k,q,range_m,velocity_mps,value``."""
    from .report import format_float

    with open(path, "w") as fh:
        fh.write("k,q,range_m,velocity_mps,value\n")
        for k in range(ddmap.n_range_bins):
            for q in range(ddmap.n_doppler_bins):
                fh.write(
                    f"{k},{q},{format_float(ddmap.range_of_bin(k))},"
                    f"{format_float(ddmap.velocity_of_bin(q))},{format_float(ddmap.values[k, q])}\n"
                )
