"""Array geometry, subcarrier grids, steering models, and synthetic multipath channels.

Conventions used throughout the package:

* The antenna array is a uniform linear array (ULA) along the x axis,
  centered on the origin.  Angles are measured from broadside, so the
  field of view is ``theta in (-pi/2, pi/2)``.
* The phase reference is the array center; the common range phase of a
  propagating wave is dropped.
* Steering matrices have shape ``(M, N)``: one row per subcarrier, one
  column per element, unit magnitude per entry.
* A beam weight vector ``w`` is applied as ``b_m = sum_n conj(w_n) * a[m, n]``,
  so the weights of a beam matched to a point share the *same* phases as
  the steering matrix at the carrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C_MPS = 299_792_458.0  # speed of light in vacuum (m/s)


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array: ``n_elements`` antennas at pitch ``spacing_m``."""

    n_elements: int
    spacing_m: float

    def __post_init__(self) -> None:
        if self.n_elements < 2:
            raise ValueError(f"n_elements must be >= 2, got {self.n_elements}")
        if self.spacing_m <= 0:
            raise ValueError(f"spacing_m must be > 0, got {self.spacing_m}")

    @property
    def aperture_m(self) -> float:
        return (self.n_elements - 1) * self.spacing_m

    @classmethod
    def half_wavelength(cls, n_elements: int, fc_hz: float) -> "ArrayConfig":
        """ULA with half-wavelength pitch at carrier ``fc_hz``."""
        return cls(n_elements, 0.5 * C_MPS / fc_hz)


@dataclass(frozen=True)
class FrequencyGrid:
    """OFDM subcarrier grid of ``n_subcarriers`` tones centered on the carrier.

    Subcarrier frequencies are ``f_m = fc - B/2 + (m + 1/2) * B/M``; the
    half-bin offset makes ``mean(f_m) == fc`` so squint is symmetric about
    the carrier.
    """

    fc_hz: float
    bandwidth_hz: float
    n_subcarriers: int

    def __post_init__(self) -> None:
        if self.n_subcarriers < 1:
            raise ValueError("n_subcarriers must be >= 1")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.fc_hz <= self.bandwidth_hz / 2:
            raise ValueError("fc_hz must exceed bandwidth_hz / 2")

    @property
    def delta_f(self) -> float:
        return self.bandwidth_hz / self.n_subcarriers

    @property
    def frequencies(self) -> np.ndarray:
        m = np.arange(self.n_subcarriers)
        return self.fc_hz - self.bandwidth_hz / 2 + (m + 0.5) * self.delta_f


@dataclass(frozen=True)
class PolarPoint:
    """Location in the array's polar plane: range from the array center and
    angle from broadside.  ``range_m = inf`` marks the far-field sentinel,
    which carries direction only."""

    range_m: float
    angle_rad: float

    def __post_init__(self) -> None:
        if not (self.range_m > 0):
            raise ValueError(f"range_m must be > 0, got {self.range_m}")
        if not abs(self.angle_rad) < math.pi / 2:
            raise ValueError("angle_rad must lie in (-pi/2, pi/2)")

    @property
    def is_far_field(self) -> bool:
        return math.isinf(self.range_m)

    @classmethod
    def far_field(cls, angle_rad: float) -> "PolarPoint":
        return cls(math.inf, angle_rad)


@dataclass(frozen=True)
class RegionOfInterest:
    """Angular sector times range annulus, with an evaluation grid resolution."""

    theta_min_rad: float
    theta_max_rad: float
    r_min_m: float
    r_max_m: float
    angle_step_rad: float = math.radians(1.0)
    range_step_m: float = 0.5

    def __post_init__(self) -> None:
        if not self.theta_min_rad < self.theta_max_rad:
            raise ValueError("theta_min_rad must be < theta_max_rad")
        if not 0 < self.r_min_m < self.r_max_m:
            raise ValueError("need 0 < r_min_m < r_max_m")
        if self.angle_step_rad <= 0 or self.range_step_m <= 0:
            raise ValueError("grid steps must be > 0")

    @property
    def theta_span_rad(self) -> float:
        return self.theta_max_rad - self.theta_min_rad

    def angle_grid(self, step_rad: float | None = None) -> np.ndarray:
        """Cell-center angles covering the angular span."""
        step = self.angle_step_rad if step_rad is None else step_rad
        n = max(1, int(math.floor(self.theta_span_rad / step + 1e-9)))
        return self.theta_min_rad + (np.arange(n) + 0.5) * step

    def range_grid(self, step_m: float | None = None) -> np.ndarray:
        """Inclusive range samples from r_min to r_max."""
        step = self.range_step_m if step_m is None else step_m
        n = int(math.floor((self.r_max_m - self.r_min_m) / step + 1e-9)) + 1
        return self.r_min_m + np.arange(n) * step

    def sample_point(self, rng: np.random.Generator) -> PolarPoint:
        """Uniform draw in (range, angle) over the region."""
        r = rng.uniform(self.r_min_m, self.r_max_m)
        theta = rng.uniform(self.theta_min_rad, self.theta_max_rad)
        return PolarPoint(r, theta)


@dataclass(frozen=True)
class ChannelParams:
    """Stochastic channel knobs: Rician K-factor (dB), scatterer count,
    per-symbol phase-noise standard deviation (degrees), noise power, seed."""

    rician_k_db: float = 30.0
    n_scatterers: int = 0
    phase_noise_deg: float = 0.0
    noise_power: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rician_k_db < 0:
            raise ValueError("rician_k_db must be >= 0")
        if self.n_scatterers < 0:
            raise ValueError("n_scatterers must be >= 0")
        if self.phase_noise_deg < 0:
            raise ValueError("phase_noise_deg must be >= 0")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be > 0")

    @property
    def rician_k_linear(self) -> float:
        return 10.0 ** (self.rician_k_db / 10.0)


def element_positions(array: ArrayConfig) -> np.ndarray:
    """Element x coordinates in meters, symmetric about the array center."""
    n = np.arange(array.n_elements)
    return (n - (array.n_elements - 1) / 2.0) * array.spacing_m


def fraunhofer_distance(array: ArrayConfig, fc_hz: float) -> float:
    """Far-field boundary 2 D^2 / lambda for aperture D at carrier fc."""
    if fc_hz <= 0:
        raise ValueError("fc_hz must be > 0")
    wavelength = C_MPS / fc_hz
    return 2.0 * array.aperture_m**2 / wavelength


def element_distances(array: ArrayConfig, point: PolarPoint) -> np.ndarray:
    """Exact element-to-point distances r_n for a finite-range point."""
    if point.is_far_field:
        raise ValueError("element_distances requires a finite-range point")
    x = element_positions(array)
    r = point.range_m
    return np.sqrt(r * r + x * x - 2.0 * r * x * math.sin(point.angle_rad))


def nf_steering_matrix(array: ArrayConfig, grid: FrequencyGrid, point: PolarPoint) -> np.ndarray:
    """Spherical-wavefront steering: a[m, n] = exp(-j 2 pi f_m (r_n - r) / c).

    Element-to-point distances are modeled exactly, so the phase profile
    carries both angle and range information.
    """
    if point.is_far_field:
        raise ValueError("nf_steering_matrix requires a finite-range point")
    delta_r = element_distances(array, point) - point.range_m
    f = np.asarray(grid.frequencies)
    return np.exp(-2j * np.pi / C_MPS * np.outer(f, delta_r))


def ff_steering_matrix(array: ArrayConfig, grid: FrequencyGrid, theta_rad: float) -> np.ndarray:
    """Planar-wavefront steering: a[m, n] = exp(+j 2 pi f_m x_n sin(theta) / c)."""
    if not abs(theta_rad) < math.pi / 2:
        raise ValueError("theta_rad must lie in (-pi/2, pi/2)")
    x = element_positions(array)
    f = np.asarray(grid.frequencies)
    return np.exp(2j * np.pi / C_MPS * np.outer(f, x * math.sin(theta_rad)))


def steering_matrix(array: ArrayConfig, grid: FrequencyGrid, point: PolarPoint) -> np.ndarray:
    """Spherical steering for finite-range points, planar for the far-field sentinel."""
    if point.is_far_field:
        return ff_steering_matrix(array, grid, point.angle_rad)
    return nf_steering_matrix(array, grid, point)


def _weight_array(weights) -> np.ndarray:
    if hasattr(weights, "weights"):
        weights = weights.weights
    return np.asarray(weights, dtype=complex)


def beamformed_response(weights, steering: np.ndarray) -> np.ndarray:
    """Per-subcarrier beamformed channel b_m = sum_n conj(w[m, n]) a[m, n].

    ``weights`` may be a length-N vector (frequency-flat phase shifters,
    broadcast over subcarriers) or an (M, N) matrix (frequency-dependent,
    e.g. true-time-delay weights).  Objects exposing a ``weights`` attribute
    are unwrapped.
    """
    w = _weight_array(weights)
    a = np.asarray(steering)
    if w.ndim == 1:
        if w.shape[0] != a.shape[1]:
            raise ValueError(f"weight length {w.shape[0]} != element count {a.shape[1]}")
        return a @ np.conj(w)
    if w.ndim == 2:
        if w.shape != a.shape:
            raise ValueError(f"weight shape {w.shape} != steering shape {a.shape}")
        return np.sum(np.conj(w) * a, axis=1)
    raise ValueError("weights must be 1-D or 2-D")


def beam_gain(weights, steering: np.ndarray) -> np.ndarray:
    """Per-subcarrier power gain |b_m|^2."""
    b = beamformed_response(weights, steering)
    return np.abs(b) ** 2


def synthesize_user_channel(
    array: ArrayConfig,
    grid: FrequencyGrid,
    point: PolarPoint,
    params: ChannelParams,
    roi: RegionOfInterest | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-antenna Rician channel (M, N): LoS steering plus scattered paths.

    ``H = sqrt(K/(K+1)) a_los + sqrt(1/(K+1)) sum_s g_s a_s / sqrt(S)`` with
    scatterer locations drawn uniformly in ``roi`` and g_s standard circular
    complex Gaussian.  With ``n_scatterers == 0`` the channel is pure LoS
    regardless of K.  Deterministic given the generator state (or
    ``params.seed`` when ``rng`` is omitted).
    """
    a_los = steering_matrix(array, grid, point)
    if params.n_scatterers == 0:
        return a_los.copy()
    if roi is None:
        raise ValueError("roi is required when n_scatterers > 0")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    k = params.rician_k_linear
    h = math.sqrt(k / (k + 1.0)) * a_los
    nlos_scale = math.sqrt(1.0 / ((k + 1.0) * params.n_scatterers))
    for _ in range(params.n_scatterers):
        p_s = roi.sample_point(rng)
        g_s = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
        h = h + nlos_scale * g_s * nf_steering_matrix(array, grid, p_s)
    return h
