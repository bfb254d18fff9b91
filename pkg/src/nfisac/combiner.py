"""Per-subcarrier digital combiners for the beamformed channel.

The delay profile of a combined channel is the squared magnitude of its
inverse DFT across subcarriers.  Energy spread (ES) scores how far that
profile's energy sits from a center bin; it is a generalized Rayleigh
quotient, so the ES-optimal combiner is a generalized eigenvector and the
peak-SNR/ES trade-off reduces to one eigenproblem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import FrequencyGrid


@dataclass
class Combiner:
    """Unit-norm subcarrier weights v (length M)."""

    values: np.ndarray
    method_tag: str = "mrc"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 1:
            raise ValueError("combiner values must be 1-D")
        nrm = np.linalg.norm(self.values)
        if not math.isclose(nrm, 1.0, rel_tol=1e-9):
            raise ValueError("combiner must be unit norm")
        if self.method_tag not in ("mrc", "es", "combined", "flat", "crb_min"):
            raise ValueError(f"unknown method_tag {self.method_tag!r}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class EsWeighting:
    """Delay-bin penalty: squared circular distance from ``center_bin``,
    zeroed within ``guard_bins`` of the center."""

    center_bin: int = 0
    guard_bins: int = 1

    def weights(self, n_bins: int) -> np.ndarray:
        if not 0 <= self.guard_bins < n_bins / 2:
            raise ValueError("guard_bins must satisfy 0 <= g < M/2")
        k = np.arange(n_bins)
        d = np.abs(k - self.center_bin % n_bins)
        d = np.minimum(d, n_bins - d)
        rho = d.astype(float) ** 2
        rho[d <= self.guard_bins] = 0.0
        return rho


@dataclass
class EsMatrices:
    """Quadratic forms of the ES quotient: ES(v) = (v^H A v) / (v^H B v)."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray


def _as_vector(v) -> np.ndarray:
    if isinstance(v, Combiner):
        v = v.values
    return np.asarray(v, dtype=complex)


def mrc_combiner(h) -> Combiner:
    """Maximum-ratio combiner v = h / ||h||; maximizes |v^H h|^2 over unit v."""
    h = _as_vector(h)
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise ValueError("mrc_combiner requires a nonzero channel")
    return Combiner(h / nrm, "mrc")


def flat_combiner(n_subcarriers: int) -> Combiner:
    """Uniform weights, the no-CSI baseline."""
    v = np.ones(n_subcarriers, dtype=complex) / math.sqrt(n_subcarriers)
    return Combiner(v, "flat")


def peak_snr(v, h, sigma2: float) -> float:
    """Combined peak SNR |v^H h|^2 / (sigma^2 ||v||^2)."""
    v = _as_vector(v)
    h = _as_vector(h)
    num = np.abs(np.vdot(v, h)) ** 2
    return float(num / (sigma2 * np.vdot(v, v).real))


def delay_profile(v, h) -> np.ndarray:
    """Power across delay bins: chi(k) = |sum_m conj(v_m) h_m e^{+j 2 pi m k / M}|^2."""
    v = _as_vector(v)
    h = _as_vector(h)
    if v.shape != h.shape:
        raise ValueError("combiner and channel lengths differ")
    m = len(h)
    spectrum = m * np.fft.ifft(np.conj(v) * h)
    return np.abs(spectrum) ** 2


def energy_spread(v, h, weighting: EsWeighting) -> float:
    """Penalty-weighted fraction of delay-domain energy away from the center bin."""
    chi = delay_profile(v, h)
    total = float(np.sum(chi))
    if total <= 0:
        raise ValueError("delay profile has no energy")
    rho = weighting.weights(len(chi))
    return float(np.sum(rho * chi) / total)


def es_matrices(h, weighting: EsWeighting) -> EsMatrices:
    """Build the ES quadratic forms.

    With c_m(k) = h_m e^{+j 2 pi m k / M}:
    A = sum_k rho(k) c(k) c(k)^H  (computed via the circulant identity
    A[m, m'] = h_m conj(h_{m'}) r[m - m'], r = IDFT of rho), and
    B = sum_k c(k) c(k)^H = M diag(|h|^2) exactly.
    """
    h = _as_vector(h)
    m = len(h)
    rho = weighting.weights(m)
    r = m * np.fft.ifft(rho)  # r[d] = sum_k rho_k e^{+j 2 pi k d / M}
    idx = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
    a = np.outer(h, np.conj(h)) * r[idx]
    a = 0.5 * (a + a.conj().T)
    b = m * np.diag(np.abs(h) ** 2).astype(complex)
    return EsMatrices(a, b)


def _solve_generalized(c: np.ndarray, b_diag: np.ndarray, pick: str) -> tuple[np.ndarray, float]:
    """Eigenvector of (C, diag(b_diag)) with smallest or largest eigenvalue,
    restricted to the support where b_diag > 0; zeros reinserted outside."""
    support = b_diag > b_diag.max() * 1e-14 if b_diag.max() > 0 else np.zeros_like(b_diag, bool)
    if not np.any(support):
        raise ValueError("channel has no nonzero subcarriers")
    cs = c[np.ix_(support, support)]
    bs = np.diag(b_diag[support])
    vals, vecs = scipy.linalg.eigh(cs, bs)
    col = 0 if pick == "smallest" else -1
    v = np.zeros(len(b_diag), dtype=complex)
    v[support] = vecs[:, col]
    return v / np.linalg.norm(v), float(vals[col])


def es_combiner(h, weighting: EsWeighting) -> Combiner:
    """ES-minimizing combiner: smallest generalized eigenvector of (A, B)."""
    h = _as_vector(h)
    mats = es_matrices(h, weighting)
    v, _ = _solve_generalized(mats.a_matrix, np.diag(mats.b_matrix).real, "smallest")
    return Combiner(v, "es")


def combined_combiner(h, weighting: EsWeighting, mu: float) -> Combiner:
    """Joint peak-SNR / ES design via one generalized eigenproblem.

    Maximizes the largest eigenvalue of (mu h h^H - (1 - mu) A, B): mu = 0
    recovers the ES minimizer, mu = 1 the peak-SNR maximizer under the
    shared B metric (equal to MRC for a flat channel).
    """
    if not 0 <= mu <= 1:
        raise ValueError("mu must lie in [0, 1]")
    h = _as_vector(h)
    mats = es_matrices(h, weighting)
    c = mu * np.outer(h, np.conj(h)) - (1.0 - mu) * mats.a_matrix
    v, _ = _solve_generalized(c, np.diag(mats.b_matrix).real, "largest")
    return Combiner(v, "combined")


def delay_crb(v, h, sigma2: float, grid: FrequencyGrid) -> float:
    """Round-trip delay Cramer-Rao bound (seconds^2) for the combined channel.

    Uses the weighted spectral spread S_f of the per-subcarrier energies
    p_m = |conj(v_m) h_m|^2 (normalized) and the combined peak SNR S:
    CRB = 1 / (8 pi^2 S S_f).  A single subcarrier has no bandwidth, so
    the bound is infinite.
    """
    v = _as_vector(v)
    h = _as_vector(h)
    q = np.abs(np.conj(v) * h) ** 2
    total = float(np.sum(q))
    if total <= 0:
        raise ValueError("combined channel has no energy")
    p = q / total
    f = np.asarray(grid.frequencies)
    f_mean = float(np.sum(p * f))
    s_f = float(np.sum(p * f**2) - f_mean**2)
    s = peak_snr(v, h, sigma2)
    if s_f <= 0 or s <= 0:
        return math.inf
    return 1.0 / (8.0 * math.pi**2 * s * s_f)


def _crb_objective_grad(v: np.ndarray, h: np.ndarray, f: np.ndarray, sigma2: float):
    """Value and gradient of J(v) = S(v) * S_f(v) on the unit sphere."""
    q = np.abs(np.conj(v) * h) ** 2
    total = float(np.sum(q))
    p = q / total
    f_mean = float(np.sum(p * f))
    s_f = float(np.sum(p * f**2) - f_mean**2)
    inner = np.vdot(v, h)
    s = float(np.abs(inner) ** 2 / sigma2)
    j = s * s_f
    # dS/dv* = h (h^H v) / sigma2 ; dS_f/dv* = (|h|^2 v / total) * ((f - f_mean)^2 - S_f)
    zeta = (f - f_mean) ** 2 - s_f
    grad = 2.0 * (s_f * h * np.conj(inner) / sigma2 + s * (np.abs(h) ** 2) * v * zeta / total)
    return j, grad


def crb_min_combiner(h, sigma2: float, grid: FrequencyGrid, iters: int = 200) -> Combiner:
    """Delay-CRB-minimizing combiner by projected gradient ascent on S * S_f.

    Starts from MRC and keeps the best iterate, so the returned CRB never
    exceeds MRC's.
    """
    h = _as_vector(h)
    if len(h) < 2:
        raise ValueError("crb_min_combiner requires M >= 2")
    f = np.asarray(grid.frequencies)
    v = mrc_combiner(h).values
    j_best, v_best = _crb_objective_grad(v, h, f, sigma2)[0], v
    eta = 1.0
    j_cur = j_best
    for _ in range(iters):
        j_cur, grad = _crb_objective_grad(v, h, f, sigma2)
        gnorm = np.linalg.norm(grad)
        if gnorm == 0:
            break
        step = eta / gnorm
        accepted = False
        while step * gnorm > 1e-14:
            v_try = v + step * grad
            v_try = v_try / np.linalg.norm(v_try)
            j_try = _crb_objective_grad(v_try, h, f, sigma2)[0]
            if j_try > j_cur:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        v, j_cur = v_try, j_try
        if j_cur > j_best:
            j_best, v_best = j_cur, v
        eta = min(2.0 * step * gnorm, 1.0)
    return Combiner(v_best, "crb_min")
