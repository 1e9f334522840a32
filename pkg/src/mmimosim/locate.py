"""Angle-of-arrival estimation with MUSIC and time-difference
multilateration across distributed arrays.

The MUSIC pseudospectrum is evaluated with plane-wave signatures along
the propagation direction of each candidate bearing, the same
convention the channel synthesis uses, so spectra computed from
synthesised snapshots peak at the true source azimuth.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ScenarioError
from .scenario import SPEED_OF_LIGHT, ArrayGeometry
from .channel import aoa_direction, spatial_signature


# ---------------------------------------------------------------------------
# snapshots and covariance


@dataclass(frozen=True)
class SnapshotSet:
    """Array observations, one snapshot per row."""

    observations: np.ndarray   # (N, M) complex
    geometry: ArrayGeometry

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=complex)
        object.__setattr__(self, "observations", obs)
        if obs.ndim != 2 or obs.shape[0] < 1:
            raise ScenarioError("observations must be (n_snapshots, n_elements)")
        if obs.shape[1] != self.geometry.n_elements:
            raise ScenarioError("snapshot width must match the element count")

    @property
    def n_snapshots(self) -> int:
        return self.observations.shape[0]


def synth_snapshots(geometry: ArrayGeometry, azimuths_deg, snr_db: float,
                    n_snapshots: int, seed=0) -> SnapshotSet:
    """Plane waves from the given bearings in white noise.

    Each source transmits an independent unit-power circular Gaussian
    symbol stream; snr_db sets the per-element SNR of each source.
    """
    azimuths = np.atleast_1d(np.asarray(azimuths_deg, dtype=float))
    if n_snapshots < 1:
        raise ScenarioError("n_snapshots must be positive")
    rng = np.random.default_rng(seed)
    m = geometry.n_elements
    steering = np.stack(
        [spatial_signature(geometry, aoa_direction(az)).coefficients
         for az in azimuths], axis=1)                        # (M, S)
    symbols = (rng.standard_normal((azimuths.size, n_snapshots))
               + 1j * rng.standard_normal((azimuths.size, n_snapshots))) / math.sqrt(2)
    x = steering @ symbols
    noise_var = 10.0 ** (-snr_db / 10.0)
    x = x + math.sqrt(noise_var / 2.0) * (
        rng.standard_normal((m, n_snapshots))
        + 1j * rng.standard_normal((m, n_snapshots)))
    return SnapshotSet(x.T, geometry)


def sample_covariance(snapshots: SnapshotSet) -> np.ndarray:
    """Hermitised sample covariance (1/N) sum of x x^H."""
    x = snapshots.observations
    r = (x.T @ x.conj()) / snapshots.n_snapshots
    return (r + r.conj().T) / 2.0


# ---------------------------------------------------------------------------
# MUSIC


@dataclass(frozen=True)
class PseudoSpectrum:
    """MUSIC pseudospectrum sampled on an azimuth grid."""

    angles_deg: np.ndarray
    values: np.ndarray
    n_sources: int
    n_elements: int


def music_spectrum(covariance, geometry: ArrayGeometry, n_sources: int,
                   angles_deg) -> PseudoSpectrum:
    """Subspace pseudospectrum 1 / ||E_n^H a(theta)||^2 on a grid.

    The noise-subspace projection is evaluated through the signal
    subspace (||a||^2 - ||E_s^H a||^2), which is the same quantity but
    needs only n_sources eigenvector columns.
    """
    r = np.asarray(covariance, dtype=complex)
    m = geometry.n_elements
    if r.shape != (m, m):
        raise ScenarioError("covariance must be n_elements x n_elements")
    if not (isinstance(n_sources, int) and 1 <= n_sources < m):
        raise ScenarioError("n_sources must lie in [1, n_elements)")
    angles = np.asarray(angles_deg, dtype=float)
    if angles.ndim != 1 or angles.size < 3:
        raise ScenarioError("the angle grid needs at least three points")
    _, vectors = np.linalg.eigh((r + r.conj().T) / 2.0)
    signal_basis = vectors[:, m - n_sources:]

    # Vectorised plane-wave signatures along each propagation direction,
    # identical per column to spatial_signature(geometry, aoa_direction(az)).
    az = np.radians(angles)
    directions = -np.stack([np.sin(az), np.cos(az), np.zeros_like(az)], axis=1)
    phases = 2.0 * np.pi / geometry.wavelength * (geometry.positions @ directions.T)
    steering = np.exp(1j * phases)                       # (M, n_angles)

    norms = np.sum(np.abs(steering) ** 2, axis=0)
    projected = np.sum(np.abs(signal_basis.conj().T @ steering) ** 2, axis=0)
    null_power = np.maximum(norms - projected, np.finfo(float).tiny)
    return PseudoSpectrum(angles, 1.0 / null_power, n_sources, m)


@dataclass(frozen=True)
class AoaEstimate:
    """Refined peak bearings, sorted by angle."""

    angles_deg: np.ndarray
    complete: bool             # False when fewer peaks than requested exist


def aoa_estimate(spectrum: PseudoSpectrum, n_peaks: int) -> AoaEstimate:
    """Pick the strongest local maxima and refine each with a
    three-point parabolic fit.

    When the grid contains fewer local maxima than requested, the ones
    found are returned and the estimate is marked incomplete.
    """
    if n_peaks < 1:
        raise ScenarioError("n_peaks must be positive")
    v = spectrum.values
    angles = spectrum.angles_deg
    interior = np.arange(1, v.size - 1)
    is_peak = (v[interior] > v[interior - 1]) & (v[interior] >= v[interior + 1])
    peak_idx = interior[is_peak]
    if peak_idx.size < n_peaks:
        warnings.warn(f"found {peak_idx.size} spectrum peaks, {n_peaks} requested")
    chosen = peak_idx[np.argsort(v[peak_idx])[::-1][:n_peaks]]
    refined = []
    for i in chosen:
        left, mid, right = v[i - 1], v[i], v[i + 1]
        denom = left - 2.0 * mid + right
        shift = 0.0 if denom == 0.0 else 0.5 * (left - right) / denom
        step = angles[i + 1] - angles[i] if shift >= 0 else angles[i] - angles[i - 1]
        refined.append(angles[i] + shift * step)
    refined.sort()
    return AoaEstimate(np.asarray(refined), complete=peak_idx.size >= n_peaks)


def peak_half_power_width(spectrum: PseudoSpectrum,
                          peak_index: Optional[int] = None) -> float:
    """Angular width of a pseudospectrum peak, in degrees.

    Measured on the normalised null spectrum eta = 1/values: the width
    is the contiguous span around the peak where eta stays below the
    midpoint between its floor at the peak and the full array norm
    ||a||^2. For a deep null this midpoint is the classical half-power
    level, so the width is finite and aperture-dependent even when the
    null itself is numerically perfect. Crossings are interpolated
    between grid points.
    """
    eta = 1.0 / spectrum.values
    angles = spectrum.angles_deg
    pk = int(np.argmin(eta)) if peak_index is None else int(peak_index)
    if not 0 <= pk < eta.size:
        raise ScenarioError("peak index out of range")
    level = (eta[pk] + float(spectrum.n_elements)) / 2.0

    def cross(inner: int, outer: int) -> float:
        # linear interpolation of the level crossing between two samples
        e0, e1 = eta[inner], eta[outer]
        if e1 == e0:
            return angles[outer]
        t = (level - e0) / (e1 - e0)
        return angles[inner] + t * (angles[outer] - angles[inner])

    lo = pk
    while lo > 0 and eta[lo - 1] <= level:
        lo -= 1
    hi = pk
    while hi < eta.size - 1 and eta[hi + 1] <= level:
        hi += 1
    left = angles[0] if lo == 0 else cross(lo, lo - 1)
    right = angles[-1] if hi == eta.size - 1 else cross(hi, hi + 1)
    return float(right - left)


def subarray_split(geometry: ArrayGeometry, n_subarrays: int) -> list[ArrayGeometry]:
    """Partition an array into equal contiguous blocks of elements.

    Blocks follow element order, so splitting a 128-element line in
    four yields four 32-element lines that cover it end to end.
    """
    m = geometry.n_elements
    if not (isinstance(n_subarrays, int) and n_subarrays >= 1):
        raise ScenarioError("n_subarrays must be a positive integer")
    if m % n_subarrays != 0:
        raise ScenarioError(f"{m} elements cannot split into {n_subarrays} equal blocks")
    size = m // n_subarrays
    out = []
    for i in range(n_subarrays):
        sl = slice(i * size, (i + 1) * size)
        out.append(ArrayGeometry(geometry.positions[sl].copy(),
                                 geometry.polarisations[sl],
                                 geometry.wavelength))
    return out


# ---------------------------------------------------------------------------
# TDOA multilateration


@dataclass(frozen=True)
class TdoaProblem:
    """Time differences of arrival against the first anchor."""

    anchors: np.ndarray        # (n, 3) metres
    tdoas: np.ndarray          # (n-1,) seconds, anchor i+1 minus anchor 0
    noise_std: float = 0.0

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=float)
        tdoas = np.asarray(self.tdoas, dtype=float)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "tdoas", tdoas)
        if anchors.ndim != 2 or anchors.shape[1] != 3 or anchors.shape[0] < 2:
            raise ScenarioError("anchors must be an (n >= 2, 3) array")
        if tdoas.shape != (anchors.shape[0] - 1,):
            raise ScenarioError("one time difference per non-reference anchor")
        d2 = np.sum((anchors[:, None, :] - anchors[None, :, :]) ** 2, axis=-1)
        np.fill_diagonal(d2, np.inf)
        if d2.min() <= 0.0:
            raise ScenarioError("anchor positions must be distinct")

    @property
    def n_anchors(self) -> int:
        return self.anchors.shape[0]


def tdoa_measure(anchors, source, noise_std: float = 0.0,
                 seed=0) -> TdoaProblem:
    """Time differences a source at a known position would produce.

    Gaussian timing noise of the given standard deviation (seconds) is
    added independently to each difference.
    """
    anchors = np.asarray(anchors, dtype=float)
    source = np.asarray(source, dtype=float)
    if source.shape != (3,):
        raise ScenarioError("source must be a 3-vector")
    if noise_std < 0:
        raise ScenarioError("noise_std must be non-negative")
    distances = np.linalg.norm(anchors - source[None, :], axis=1)
    tdoas = (distances[1:] - distances[0]) / SPEED_OF_LIGHT
    if noise_std > 0.0:
        rng = np.random.default_rng(seed)
        tdoas = tdoas + noise_std * rng.standard_normal(tdoas.size)
    return TdoaProblem(anchors, tdoas, noise_std)


@dataclass(frozen=True)
class TdoaSolution:
    """Gauss-Newton output: always inspect ``converged``.

    A non-converged solution still carries the last iterate and its
    residual so degenerate geometries can be diagnosed instead of
    silently trusted. The residual is the sum of squared time errors
    in seconds squared.
    """

    position: np.ndarray       # (3,)
    residual: float
    converged: bool
    n_iterations: int


def tdoa_solve(problem: TdoaProblem, initial_guess, dimensions: int = 2,
               max_iterations: int = 100, step_tol_m: float = 1e-9) -> TdoaSolution:
    """Iterative least-squares multilateration.

    Solves for the source position (x, y for a 2-D solve, holding z at
    the initial guess) by Gauss-Newton on the time residuals
    tdoa_i - (|x - a_i| - |x - a_0|)/c. Needs at least dimensions + 1
    anchors; collinear anchors in a 2-D solve are flagged with a
    warning because the mirror ambiguity makes the answer depend on the
    initial guess.
    """
    if dimensions not in (2, 3):
        raise ScenarioError("dimensions must be 2 or 3")
    if problem.n_anchors < dimensions + 1:
        raise ScenarioError(f"a {dimensions}-D solve needs at least "
                            f"{dimensions + 1} anchors")
    guess = np.asarray(initial_guess, dtype=float)
    if guess.shape == (2,) and dimensions == 2:
        guess = np.array([guess[0], guess[1], 0.0])
    if guess.shape != (3,):
        raise ScenarioError("initial_guess must be a 2- or 3-vector")
    if dimensions == 2:
        spans = problem.anchors[1:, :2] - problem.anchors[0, :2]
        if np.linalg.matrix_rank(spans, tol=1e-9) < 2:
            warnings.warn("anchors are collinear; the 2-D solution is ambiguous")

    anchors = problem.anchors
    x = guess.copy()
    n_iter = 0
    converged = False

    def residuals(pos):
        d = np.linalg.norm(anchors - pos[None, :], axis=1)
        d = np.maximum(d, 1e-12)
        return (d[1:] - d[0]) / SPEED_OF_LIGHT - problem.tdoas, d

    for n_iter in range(1, max_iterations + 1):
        err, d = residuals(x)
        unit = (x[None, :] - anchors) / d[:, None]
        jac = (unit[1:, :dimensions] - unit[0, :dimensions]) / SPEED_OF_LIGHT
        step, *_ = np.linalg.lstsq(jac, -err, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        x[:dimensions] = x[:dimensions] + step
        if np.linalg.norm(x) > 1e9:
            break
        if np.linalg.norm(step) < step_tol_m:
            converged = True
            break

    err, _ = residuals(x)
    return TdoaSolution(position=x, residual=float(np.sum(err ** 2)),
                        converged=converged, n_iterations=n_iter)
