"""Frequency-flat analog beam codebooks.

Four constructions are provided:

* angle-only far-field beams,
* the polar (angle x focal-distance) beamfocusing codebook,
* sub-aperture beam broadening,
* a fairness-optimized codebook that maximizes the worst-case
  subcarrier-summed gain over each angular sector via projected gradient
  ascent on a smooth soft-minimum surrogate.

All codewords obey the phase-shifter constraint |w_n| = 1/sqrt(N).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .core import (
    C_MPS,
    ArrayConfig,
    FrequencyGrid,
    PolarPoint,
    RegionOfInterest,
    element_distances,
    element_positions,
    steering_matrix,
)

METHOD_TAGS = ("ff", "nf_polar", "broadening", "fairness", "ttd")


@dataclass
class Codeword:
    """Analog beam weights with focal metadata.

    ``weights`` is length-N (frequency-flat) or (M, N) for
    frequency-dependent hardware such as true-time delays.  Every entry has
    magnitude 1/sqrt(N).
    """

    weights: np.ndarray
    focus: PolarPoint | None = None
    method_tag: str = "ff"

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=complex)
        if self.weights.ndim not in (1, 2):
            raise ValueError("weights must be 1-D or 2-D")
        n = self.weights.shape[-1]
        mags = np.abs(self.weights) * math.sqrt(n)
        if not np.all(np.abs(mags - 1.0) < 1e-9):
            raise ValueError("codeword entries must have magnitude 1/sqrt(N)")
        if self.method_tag not in METHOD_TAGS:
            raise ValueError(f"unknown method_tag {self.method_tag!r}")

    @property
    def n_elements(self) -> int:
        return self.weights.shape[-1]

    @property
    def is_frequency_dependent(self) -> bool:
        return self.weights.ndim == 2


@dataclass
class Codebook:
    """Ordered collection of codewords sharing one array size."""

    codewords: list[Codeword]
    roi: RegionOfInterest | None = None

    def __post_init__(self) -> None:
        if not self.codewords:
            raise ValueError("codebook must contain at least one codeword")
        n = self.codewords[0].n_elements
        if any(cw.n_elements != n for cw in self.codewords):
            raise ValueError("all codewords must share n_elements")

    @property
    def size(self) -> int:
        return len(self.codewords)

    @property
    def n_elements(self) -> int:
        return self.codewords[0].n_elements

    @property
    def method_tag(self) -> str:
        return self.codewords[0].method_tag

    def __len__(self) -> int:
        return len(self.codewords)

    def __iter__(self):
        return iter(self.codewords)

    def __getitem__(self, i: int) -> Codeword:
        return self.codewords[i]


@dataclass(frozen=True)
class PgdParams:
    """Projected-gradient knobs for the fairness optimizer.

    ``beta0 = None`` starts the soft-min sharpness at 10/median(initial
    gains), which is scale-free; beta is multiplied by ``beta_growth`` every
    ``epoch_len`` iterations.
    """

    step_size: float = 1.0
    beta0: float | None = None
    beta_growth: float = 2.0
    epoch_len: int = 50
    max_iters: int = 300
    rel_tol: float = 1e-6
    backtrack: float = 0.5

    def __post_init__(self) -> None:
        if self.step_size <= 0 or self.epoch_len <= 0:
            raise ValueError("step_size and epoch_len must be > 0")
        if self.beta0 is not None and self.beta0 <= 0:
            raise ValueError("beta0 must be > 0")
        if self.beta_growth < 1:
            raise ValueError("beta_growth must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be > 0")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")


@dataclass(frozen=True)
class Sector:
    """Angular slice of a region, carrying its evaluation grid of (r, theta) points."""

    theta_min_rad: float
    theta_max_rad: float
    points: np.ndarray  # shape (I, 2), columns (range_m, angle_rad)

    @property
    def center_angle_rad(self) -> float:
        return 0.5 * (self.theta_min_rad + self.theta_max_rad)


def focus_codeword(array: ArrayConfig, fc_hz: float, point: PolarPoint, method_tag: str = "ff") -> Codeword:
    """Phase-shifter beam matched to ``point`` at the carrier.

    Weights copy the steering phases at fc, so the beamformed response at
    the focus is exactly sqrt(N) there.  Far-field points get planar
    phases, finite-range points spherical ones.
    """
    n = array.n_elements
    x = element_positions(array)
    if point.is_far_field:
        phase = 2.0 * np.pi * fc_hz / C_MPS * x * math.sin(point.angle_rad)
    else:
        delta_r = element_distances(array, point) - point.range_m
        phase = -2.0 * np.pi * fc_hz / C_MPS * delta_r
    return Codeword(np.exp(1j * phase) / math.sqrt(n), focus=point, method_tag=method_tag)


def ff_codebook(array: ArrayConfig, fc_hz: float, angles_rad) -> Codebook:
    """One planar beam per angle."""
    angles = np.atleast_1d(np.asarray(angles_rad, dtype=float))
    if angles.size == 0:
        raise ValueError("angles_rad must be non-empty")
    cws = [focus_codeword(array, fc_hz, PolarPoint.far_field(t), "ff") for t in angles]
    return Codebook(cws)


def polar_focal_distances(n_rings: int, r_min_m: float) -> np.ndarray:
    """Focal distances sampled uniformly in inverse range.

    ``1/r_s = (s / n_rings) / r_min`` for s = n_rings..1, then the
    far-field point (1/r = 0, returned as inf) appended as ring 0.
    """
    if n_rings < 1:
        raise ValueError("n_rings must be >= 1")
    if r_min_m <= 0:
        raise ValueError("r_min_m must be > 0")
    s = np.arange(n_rings, 0, -1, dtype=float)
    finite = r_min_m * n_rings / s
    return np.concatenate([finite, [math.inf]])


def nf_polar_codebook(
    array: ArrayConfig,
    fc_hz: float,
    roi: RegionOfInterest,
    angle_step_rad: float,
    n_rings: int,
) -> Codebook:
    """Cartesian product of an angle grid and inverse-range focal rings.

    Finite rings use spherical focusing phases at the carrier; the
    far-field ring degenerates to the planar beam at the same angle.
    """
    angles = roi.angle_grid(angle_step_rad)
    distances = polar_focal_distances(n_rings, roi.r_min_m)
    cws = []
    for theta in angles:
        for r in distances:
            p = PolarPoint.far_field(theta) if math.isinf(r) else PolarPoint(r, theta)
            cws.append(focus_codeword(array, fc_hz, p, "nf_polar"))
    return Codebook(cws, roi=roi)


def beam_broadening_codeword(
    array: ArrayConfig, fc_hz: float, point: PolarPoint, q_subapertures: int
) -> Codeword:
    """Sub-aperture broadened beam toward ``point``.

    The array is split into ``q`` contiguous sub-apertures.  On top of the
    exact carrier focusing phases toward the point, each sub-aperture adds
    the tangent line (at its own center) of the quadratic chirp
    ``pi q (x/D)^2``: every segment points at a slightly offset direction,
    the coherent aperture drops to ~D/q, and the beam widens by roughly q
    at the cost of ~1/q peak gain.  q = 1 reproduces the focused beam
    exactly.
    """
    n = array.n_elements
    if q_subapertures < 1:
        raise ValueError("q_subapertures must be >= 1")
    if q_subapertures > n:
        raise ValueError("q_subapertures must be <= n_elements")
    base = focus_codeword(array, fc_hz, point).weights
    segments = np.array_split(np.arange(n), q_subapertures)
    x = element_positions(array)
    chirp = math.pi * q_subapertures / array.aperture_m**2
    offsets = np.zeros(n)
    for idx in segments:
        z_s = float(np.mean(x[idx]))
        offsets[idx] = chirp * (2.0 * z_s * x[idx] - z_s * z_s)
    return Codeword(base * np.exp(1j * offsets), focus=point, method_tag="broadening")


def beam_broadening_codebook(
    array: ArrayConfig, fc_hz: float, q_subapertures: int, foci
) -> Codebook:
    """One broadened beam per focal point."""
    foci = list(foci)
    if not foci:
        raise ValueError("foci must be non-empty")
    cws = [beam_broadening_codeword(array, fc_hz, p, q_subapertures) for p in foci]
    return Codebook(cws)


def partition_roi(roi: RegionOfInterest, n_codewords: int) -> list[Sector]:
    """Split the region into ``n_codewords`` equal angular sectors.

    Each sector carries a grid of (r, theta) points: the full ROI range
    span times the sector's angle span, at the ROI's grid resolution
    (cell-center angles, inclusive range samples).
    """
    if n_codewords < 1:
        raise ValueError("n_codewords must be >= 1")
    edges = np.linspace(roi.theta_min_rad, roi.theta_max_rad, n_codewords + 1)
    r_grid = roi.range_grid()
    sectors = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        n_cells = max(1, int(math.floor((hi - lo) / roi.angle_step_rad + 1e-9)))
        step = (hi - lo) / n_cells
        angles = lo + (np.arange(n_cells) + 0.5) * step
        rr, tt = np.meshgrid(r_grid, angles, indexing="ij")
        pts = np.column_stack([rr.ravel(), tt.ravel()])
        sectors.append(Sector(float(lo), float(hi), pts))
    return sectors


def steering_cache(array: ArrayConfig, grid: FrequencyGrid, points: np.ndarray) -> np.ndarray:
    """Stacked steering matrices, shape (I, M, N), one per (r, theta) row.

    Memory grows as I*M*N complex entries; chunk the point set for very
    large instances.
    """
    pts = np.asarray(points, dtype=float)
    out = np.empty((pts.shape[0], grid.n_subcarriers, array.n_elements), dtype=complex)
    for i, (r, theta) in enumerate(pts):
        p = PolarPoint.far_field(theta) if math.isinf(r) else PolarPoint(r, theta)
        out[i] = steering_matrix(array, grid, p)
    return out


def point_gains(weights, cache: np.ndarray) -> np.ndarray:
    """Subcarrier-summed beam gain at each cached point: g_i = sum_m |w^H a_im|^2."""
    w = weights.weights if hasattr(weights, "weights") else np.asarray(weights, dtype=complex)
    b = np.einsum("imn,n->im", cache, np.conj(w))
    return np.sum(np.abs(b) ** 2, axis=1)


def smooth_min_objective(weights, cache: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Soft minimum of per-point gains and its gradient.

    Value is ``F = -(1/beta) log sum_i exp(-beta g_i)``, always a lower
    bound on ``min_i g_i`` and converging to it as beta grows.  The
    gradient is returned as a complex vector whose real/imag parts are the
    exact partials with respect to Re(w)/Im(w).  The log-sum is evaluated
    in shifted form, so large beta cannot overflow.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    w = weights.weights if hasattr(weights, "weights") else np.asarray(weights, dtype=complex)
    b = np.einsum("imn,n->im", cache, np.conj(w))
    g = np.sum(np.abs(b) ** 2, axis=1)
    value = -logsumexp(-beta * g) / beta
    p = softmax(-beta * g)
    grad = 2.0 * np.einsum("im,imn->n", p[:, None] * np.conj(b), cache)
    return float(value), grad


def project_unit_modulus(w: np.ndarray) -> np.ndarray:
    """Nearest point with every entry of magnitude 1/sqrt(N).

    Zero entries, where the projection is ambiguous, are assigned phase 0.
    """
    w = np.asarray(w, dtype=complex)
    n = w.shape[-1]
    mags = np.abs(w)
    safe = np.where(mags == 0.0, 1.0, mags)
    out = w / (math.sqrt(n) * safe)
    return np.where(mags == 0.0, 1.0 / math.sqrt(n), out)


def pgd_codeword(
    init: Codeword | np.ndarray,
    cache: np.ndarray,
    params: PgdParams | None = None,
    method_tag: str = "fairness",
) -> tuple[Codeword, np.ndarray]:
    """Maximize the soft minimum gain over a sector grid by projected gradient ascent.

    Each accepted step is ``w <- project(w + eta * grad)`` with eta halved
    until the objective does not decrease; beta is multiplied by
    ``beta_growth`` at every epoch boundary (which can only raise the
    objective for a fixed iterate, so the returned trace is nondecreasing).
    Iteration stops on ``rel_tol`` relative improvement within an epoch or
    after ``max_iters`` total steps; the current (best-seen) iterate is
    always returned.  Fully deterministic.
    """
    params = params or PgdParams()
    focus = init.focus if isinstance(init, Codeword) else None
    w = project_unit_modulus(init.weights if isinstance(init, Codeword) else np.asarray(init))

    g0 = point_gains(w, cache)
    if params.beta0 is not None:
        beta = params.beta0
    else:
        med = float(np.median(g0))
        beta = 10.0 / med if med > 0 else 1.0

    value, grad = smooth_min_objective(w, cache, beta)
    trace = [value]
    if params.max_iters == 0:
        return Codeword(w, focus=focus, method_tag=method_tag), np.asarray(trace)

    gnorm = np.linalg.norm(grad)
    eta0 = params.step_size * np.linalg.norm(w) / gnorm if gnorm > 0 else params.step_size
    eta = eta0
    eta_floor = 1e-14 * eta0

    iters_used = 0
    n_epochs = max(1, math.ceil(params.max_iters / params.epoch_len))
    for epoch in range(n_epochs):
        if epoch > 0:
            beta *= params.beta_growth
            value, grad = smooth_min_objective(w, cache, beta)
        epoch_progress = False
        for _ in range(params.epoch_len):
            if iters_used >= params.max_iters:
                break
            iters_used += 1
            gnorm = np.linalg.norm(grad)
            if gnorm == 0:
                break
            accepted = False
            while eta >= eta_floor:
                w_try = project_unit_modulus(w + eta * grad)
                v_try, g_try = smooth_min_objective(w_try, cache, beta)
                if v_try >= value:
                    accepted = True
                    break
                eta *= params.backtrack
            if not accepted:
                eta = eta0
                break
            improvement = v_try - value
            w, value, grad = w_try, v_try, g_try
            trace.append(value)
            epoch_progress = True
            eta = min(eta / params.backtrack, eta0)
            if improvement <= params.rel_tol * max(abs(value), 1e-12):
                break
        if not epoch_progress and epoch > 0:
            break
        if iters_used >= params.max_iters:
            break
    return Codeword(w, focus=focus, method_tag=method_tag), np.asarray(trace)


def fairness_codebook(
    array: ArrayConfig,
    grid: FrequencyGrid,
    roi: RegionOfInterest,
    size: int,
    params: PgdParams | None = None,
) -> Codebook:
    """Per-sector fairness-optimized codebook.

    The region is partitioned into ``size`` angular sectors; each sector's
    beam starts from the planar beam at the sector center and is refined by
    projected gradient ascent on the soft minimum of subcarrier-summed
    gains over the sector grid.  Deterministic given the parameters;
    sectors are independent.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    params = params or PgdParams()
    mid_r = 0.5 * (roi.r_min_m + roi.r_max_m)
    cws = []
    for sector in partition_roi(roi, size):
        cache = steering_cache(array, grid, sector.points)
        init = focus_codeword(array, grid.fc_hz, PolarPoint.far_field(sector.center_angle_rad))
        cw, _ = pgd_codeword(init, cache, params, method_tag="fairness")
        cw.focus = PolarPoint(mid_r, sector.center_angle_rad)
        cws.append(cw)
    return Codebook(cws, roi=roi)


def codebook_to_dict(cb: Codebook) -> dict:
    """JSON-ready document: {"n_elements", "method", "codewords": [...]}.

    Frequency-flat weights serialize as [[re, im], ...]; frequency-dependent
    weights as one such row per subcarrier.  A far-field focus stores
    ``"r": null``.
    """
    entries = []
    for cw in cb.codewords:
        if cw.focus is None:
            raise ValueError("codeword focus metadata is required for serialization")
        focus = {
            "r": None if cw.focus.is_far_field else float(cw.focus.range_m),
            "theta_deg": math.degrees(cw.focus.angle_rad),
        }
        w = cw.weights
        if w.ndim == 1:
            weights = [[float(z.real), float(z.imag)] for z in w]
        else:
            weights = [[[float(z.real), float(z.imag)] for z in row] for row in w]
        entries.append({"focus": focus, "weights": weights})
    return {"n_elements": cb.n_elements, "method": cb.method_tag, "codewords": entries}


def save_codebook(cb: Codebook, path) -> None:
    with open(path, "w") as fh:
        json.dump(codebook_to_dict(cb), fh, indent=1, sort_keys=True)
        fh.write("\n")


def codebook_from_dict(doc: dict) -> Codebook:
    method = doc["method"]
    cws = []
    for entry in doc["codewords"]:
        f = entry["focus"]
        theta = math.radians(f["theta_deg"])
        focus = PolarPoint.far_field(theta) if f["r"] is None else PolarPoint(float(f["r"]), theta)
        w = np.asarray(entry["weights"], dtype=float)
        if w.ndim == 2:  # [[re, im], ...]
            weights = w[:, 0] + 1j * w[:, 1]
        else:  # [subcarrier][element][re, im]
            weights = w[..., 0] + 1j * w[..., 1]
        cws.append(Codeword(weights, focus=focus, method_tag=method))
    return Codebook(cws)


def load_codebook(path) -> Codebook:
    with open(path) as fh:
        return codebook_from_dict(json.load(fh))
