"""True-time-delay beamformers: frequency-dependent analog baselines.

An ideal per-element TTD beam applies the exact focusing delay at every
element and is therefore squint-free.  The quantized variant groups
elements into contiguous sub-arrays, each driven by one delay unit of
finite resolution, with per-element phase shifters absorbing the residual
at the carrier only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    C_MPS,
    ArrayConfig,
    FrequencyGrid,
    PolarPoint,
    element_distances,
    element_positions,
)
from .codebook import Codeword


@dataclass(frozen=True)
class TtdConfig:
    """Delay hardware: ``n_units`` delay elements at ``resolution_s`` quantization."""

    n_units: int
    resolution_s: float = 0.0
    mode: str = "quantized_subarray"

    def __post_init__(self) -> None:
        if self.n_units < 1:
            raise ValueError("n_units must be >= 1")
        if self.mode not in ("ideal_full", "quantized_subarray"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "quantized_subarray" and self.resolution_s <= 0:
            raise ValueError("resolution_s must be > 0 in quantized mode")


def focus_delays(array: ArrayConfig, point: PolarPoint) -> np.ndarray:
    """Per-element focusing delays tau_n = (r_n - r) / c (far-field: -x_n sin(theta) / c)."""
    if point.is_far_field:
        x = element_positions(array)
        return -x * math.sin(point.angle_rad) / C_MPS
    return (element_distances(array, point) - point.range_m) / C_MPS


def ideal_ttd_weights(array: ArrayConfig, grid: FrequencyGrid, focus: PolarPoint) -> Codeword:
    """Per-element TTD beam: w[m, n] = exp(-j 2 pi f_m tau_n) / sqrt(N).

    Matches the steering phases at every subcarrier, so the gain at the
    focus equals N across the whole band (no squint).
    """
    tau = focus_delays(array, focus)
    f = np.asarray(grid.frequencies)
    w = np.exp(-2j * np.pi * np.outer(f, tau)) / math.sqrt(array.n_elements)
    return Codeword(w, focus=focus, method_tag="ttd")


def _round_ties_toward_zero(x: np.ndarray) -> np.ndarray:
    a = np.abs(x)
    rounded = np.floor(a + 0.5)
    rounded = np.where(a % 1.0 == 0.5, rounded - 1.0, rounded)
    return np.sign(x) * rounded


def subarray_ttd_weights(
    array: ArrayConfig, grid: FrequencyGrid, focus: PolarPoint, ttd: TtdConfig
) -> Codeword:
    """Quantized sub-array TTD beam with carrier-phase residual correction.

    The array splits into ``ttd.n_units`` contiguous sub-arrays.  Each
    applies the quantized mean focusing delay of its elements (round to
    nearest, ties toward zero); phase shifters then correct the remaining
    per-element phase exactly at the carrier, so the focus gain at fc is N
    regardless of the delay resolution.
    """
    n = array.n_elements
    if ttd.n_units > n:
        raise ValueError("n_units must be <= n_elements")
    tau = focus_delays(array, focus)
    segments = np.array_split(np.arange(n), ttd.n_units)
    tau_applied = np.empty(n)
    for idx in segments:
        tau_k = float(np.mean(tau[idx]))
        if ttd.mode == "quantized_subarray":
            tau_k = ttd.resolution_s * float(_round_ties_toward_zero(np.asarray(tau_k / ttd.resolution_s)))
        tau_applied[idx] = tau_k
    # residual phase shifter, exact at fc
    phi = -2.0 * np.pi * grid.fc_hz * (tau - tau_applied)
    f = np.asarray(grid.frequencies)
    w = np.exp(-2j * np.pi * np.outer(f, tau_applied) + 1j * phi[None, :]) / math.sqrt(n)
    return Codeword(w, focus=focus, method_tag="ttd")
