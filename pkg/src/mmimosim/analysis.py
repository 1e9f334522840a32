"""Frequency-domain channel analysis: power profiles across the array,
comb-to-full-grid interpolation, power delay profiles, delay spread,
and coherence bandwidth.

Comb-sampled estimates (one tone per resource block) limit the
observable delay span to 1/(12 x 15 kHz) = 5.56 us; longer echoes wrap
around. Containers carry that alias-free limit so downstream numbers
are never silently over-trusted.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ScenarioError
from .channel import ChannelTensor, FrequencyGrid
from .frame import EstimatedCfr


# ---------------------------------------------------------------------------
# power across the array


@dataclass(frozen=True)
class PowerProfile:
    """Received power per antenna for one user, normalised so the
    strongest element sits at 0 dB."""

    user: int
    power_linear: np.ndarray   # (M,) mean |H|^2 per antenna
    power_db: np.ndarray       # (M,) normalised to the maximum


def antenna_power_profile(tensor: ChannelTensor, user: int) -> PowerProfile:
    """Average |H|^2 over tones for each antenna of one user."""
    if not 0 <= user < tensor.n_users:
        raise ScenarioError(f"user index {user} out of range")
    power = np.mean(np.abs(tensor.cfr[:, :, user]) ** 2, axis=0)
    peak = power.max()
    if peak <= 0.0:
        raise ScenarioError("cannot profile an all-zero channel")
    return PowerProfile(user, power, 10.0 * np.log10(power / peak))


# ---------------------------------------------------------------------------
# comb interpolation


def _interpolate_comb(samples: np.ndarray, offset: int, stride: int,
                      n_occupied: int) -> np.ndarray:
    """Reconstruct a full tone grid from one comb of samples.

    The comb fixes n_occupied/stride delay-domain coefficients; mapping
    them back onto the dense grid is exact for any channel whose
    impulse response fits inside the comb's alias-free delay span.
    ``samples`` is (n_comb, ...) over tones offset, offset+stride, ...
    """
    n_comb = samples.shape[0]
    taps = np.fft.ifft(samples, axis=0)
    correction = np.exp(2j * np.pi * offset * np.arange(n_comb) / n_occupied)
    taps = taps * correction.reshape((n_comb,) + (1,) * (samples.ndim - 1))
    padded = np.zeros((n_occupied,) + samples.shape[1:], dtype=complex)
    padded[:n_comb] = taps
    return np.fft.fft(padded, axis=0)


def interpolate_cfr(estimate: Union[EstimatedCfr, ChannelTensor]) -> ChannelTensor:
    """Expand comb-sampled channel estimates onto the dense tone grid.

    Accepts either the output of the least-squares estimator or a
    comb-decimated tensor. The result reproduces the comb samples
    exactly and is exact everywhere for delay-limited channels; its
    alias_free_delay field records the comb's wrap-around limit.
    """
    if isinstance(estimate, EstimatedCfr):
        pm = estimate.pilot_map
        n_occupied = pm.n_occupied
        stride = pm.stride
        spacing = estimate.subcarrier_spacing
        offsets = pm.offsets()
        per_user = [estimate.values[k] for k in range(pm.n_users)]
        n_antennas = estimate.values.shape[2]
    elif isinstance(estimate, ChannelTensor):
        if estimate.grid.stride == 1:
            raise ScenarioError("tensor is already on the dense grid")
        n_occupied = estimate.grid.n_occupied
        stride = estimate.grid.stride
        spacing = estimate.grid.subcarrier_spacing
        offsets = estimate.grid.user_offsets
        per_user = [estimate.cfr[:, :, k] for k in range(estimate.n_users)]
        n_antennas = estimate.n_antennas
    else:
        raise ScenarioError("expected an EstimatedCfr or a decimated ChannelTensor")

    full = np.empty((n_occupied, n_antennas, len(per_user)), dtype=complex)
    for k, samples in enumerate(per_user):
        full[:, :, k] = _interpolate_comb(samples, offsets[k], stride, n_occupied)
    grid = FrequencyGrid(n_occupied, spacing)
    return ChannelTensor(full, grid, model="interpolated",
                         alias_free_delay=1.0 / (stride * spacing))


# ---------------------------------------------------------------------------
# power delay profile


@dataclass(frozen=True)
class PdpResult:
    """Power delay profile over the IDFT delay grid.

    With N tones at spacing df the delay bins sit at i/(N df) and the
    bin values satisfy sum(power) = mean(|CFR|^2) (an exact property of
    the normalised inverse DFT, up to the analysis window).
    """

    delays: np.ndarray         # (N,) seconds
    power: np.ndarray          # (N,) linear power per bin
    bin_spacing: float         # seconds
    window: str
    alias_free_delay: Optional[float] = None


def pdp(cfr, subcarrier_spacing: float, window: str = "rect",
        alias_free_delay: Optional[float] = None) -> PdpResult:
    """|IDFT|^2 of a dense-grid frequency response.

    ``cfr`` is one antenna's response (N,) or a stack (N, M) whose
    per-antenna profiles are averaged. A Hann window trades delay
    resolution for sidelobe suppression; the default is no window.
    """
    h = np.asarray(cfr, dtype=complex)
    if h.ndim == 1:
        h = h[:, None]
    if h.ndim != 2 or h.shape[0] < 2:
        raise ScenarioError("cfr must be (n_tones,) or (n_tones, n_antennas)")
    if not subcarrier_spacing > 0:
        raise ScenarioError("subcarrier_spacing must be positive")
    n = h.shape[0]
    if window == "rect":
        w = np.ones(n)
    elif window == "hann":
        w = np.hanning(n)
    else:
        raise ScenarioError(f"unknown window '{window}'")
    taps = np.fft.ifft(h * w[:, None], axis=0)
    power = np.mean(np.abs(taps) ** 2, axis=1)
    spacing = 1.0 / (n * subcarrier_spacing)
    delays = np.arange(n) * spacing
    return PdpResult(delays, power, spacing, window, alias_free_delay)


def pdp_from_tensor(tensor: ChannelTensor, user: int,
                    antenna: Optional[int] = None,
                    window: str = "rect") -> PdpResult:
    """Power delay profile of one user from a dense-grid tensor,
    averaged over the array unless one antenna is selected."""
    if tensor.grid.stride != 1:
        raise ScenarioError("power delay profiles need a dense-grid tensor; "
                            "interpolate the comb estimate first")
    if not 0 <= user < tensor.n_users:
        raise ScenarioError(f"user index {user} out of range")
    h = tensor.cfr[:, :, user]
    if antenna is not None:
        if not 0 <= antenna < tensor.n_antennas:
            raise ScenarioError(f"antenna index {antenna} out of range")
        h = h[:, antenna]
    return pdp(h, tensor.grid.subcarrier_spacing, window=window,
               alias_free_delay=tensor.alias_free_delay)


def rms_delay_spread(profile: PdpResult,
                     floor_db: Optional[float] = 25.0) -> float:
    """Second central moment of the delay profile, in seconds.

    Bins more than floor_db below the peak are zeroed first so that
    numerical leakage far from the real echoes cannot inflate the
    spread; pass None to disable the floor.
    """
    power = profile.power.astype(float).copy()
    if power.sum() <= 0.0:
        raise ScenarioError("delay profile has no power")
    if floor_db is not None:
        power[power < power.max() * 10.0 ** (-floor_db / 10.0)] = 0.0
    total = power.sum()
    mean = float(np.sum(power * profile.delays) / total)
    var = float(np.sum(power * (profile.delays - mean) ** 2) / total)
    return math.sqrt(max(var, 0.0))


# ---------------------------------------------------------------------------
# coherence bandwidth


def correlation_curve(cfr, subcarrier_spacing: float,
                      window: str = "hann") -> tuple[np.ndarray, np.ndarray]:
    """Normalised frequency autocorrelation magnitude per lag.

    Lag products are tapered (Hann by default) before averaging, which
    suppresses the spectral-leakage bias of the finite band, and each
    lag is normalised by the windowed energies of the two segments so
    the curve starts at exactly 1.
    """
    h = np.asarray(cfr, dtype=complex).ravel()
    n = h.size
    if n < 2:
        raise ScenarioError("correlation needs at least two tones")
    if not subcarrier_spacing > 0:
        raise ScenarioError("subcarrier_spacing must be positive")
    if window == "hann":
        w = np.hanning(n)
    elif window == "rect":
        w = np.ones(n)
    else:
        raise ScenarioError(f"unknown window '{window}'")
    lags = np.arange(n)
    rho = np.empty(n)
    rho[0] = 1.0
    for lag in range(1, n):
        taper = w[: n - lag] * w[lag:]
        num = abs(np.sum(taper * h[: n - lag] * np.conj(h[lag:])))
        den = math.sqrt(np.sum(taper * np.abs(h[: n - lag]) ** 2)
                        * np.sum(taper * np.abs(h[lag:]) ** 2))
        rho[lag] = num / den if den > 0 else 0.0
    return lags * subcarrier_spacing, rho


def coherence_bandwidth(cfr, threshold: float, subcarrier_spacing: float,
                        window: str = "hann") -> float:
    """Frequency separation where the autocorrelation first drops below
    the threshold, linearly interpolated between lag samples.

    Only separations up to half the measured band are scanned: beyond
    that the lag products average too few tones to trust, and spurious
    dips there would masquerade as decorrelation. Returns inf when the
    correlation never falls below the threshold inside that span (for
    example a flat channel, or any channel whose correlation floor sits
    above the threshold).
    """
    if not 0.0 < threshold < 1.0:
        raise ScenarioError("threshold must lie strictly between 0 and 1")
    h = np.asarray(cfr, dtype=complex).ravel()
    n = h.size
    if n < 2:
        raise ScenarioError("coherence bandwidth needs at least two tones")
    if not subcarrier_spacing > 0:
        raise ScenarioError("subcarrier_spacing must be positive")
    if window == "hann":
        w = np.hanning(n)
    elif window == "rect":
        w = np.ones(n)
    else:
        raise ScenarioError(f"unknown window '{window}'")
    prev = 1.0
    for lag in range(1, n // 2 + 1):
        taper = w[: n - lag] * w[lag:]
        num = abs(np.sum(taper * h[: n - lag] * np.conj(h[lag:])))
        den = math.sqrt(np.sum(taper * np.abs(h[: n - lag]) ** 2)
                        * np.sum(taper * np.abs(h[lag:]) ** 2))
        rho = num / den if den > 0 else 0.0
        if rho < threshold:
            fraction = (prev - threshold) / (prev - rho)
            return (lag - 1 + fraction) * subcarrier_spacing
        prev = rho
    return math.inf


def across_array_coherence(tensor: ChannelTensor, user: int, threshold: float,
                           window: str = "hann", n_threads: int = 1) -> np.ndarray:
    """Coherence bandwidth of one user at every antenna.

    The per-antenna computations are independent, so they can be
    fanned out over a thread pool; the result is identical for any
    thread count.
    """
    if tensor.grid.stride != 1:
        raise ScenarioError("coherence analysis needs a dense-grid tensor")
    if not 0 <= user < tensor.n_users:
        raise ScenarioError(f"user index {user} out of range")
    if n_threads < 1:
        raise ScenarioError("n_threads must be positive")
    spacing = tensor.grid.subcarrier_spacing
    columns = tensor.cfr[:, :, user]

    def one(m: int) -> float:
        return coherence_bandwidth(columns[:, m], threshold, spacing, window)

    m_total = tensor.n_antennas
    out = np.empty(m_total)
    if n_threads == 1:
        for m in range(m_total):
            out[m] = one(m)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for m, value in enumerate(pool.map(one, range(m_total))):
                out[m] = value
    return out
