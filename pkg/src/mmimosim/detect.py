"""Linear multi-user detection and uncoded QAM transmission.

Detector weight matrices are stored users x antennas so that
``weights.matrix @ y`` separates a stacked antenna observation into
per-user symbol estimates. All three detectors are built from a
singular value decomposition of the channel rather than from normal
equations: the reference deployment produces line-of-sight channels
whose Gram matrices are far too ill-conditioned for the textbook
(H^H H)^-1 route to survive double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import RankDeficientChannelError, ScenarioError
from .channel import ChannelMatrix, iid_rayleigh, los_channel
from .scenario import Scenario

_SUPPORTED_ORDERS = (4, 16, 64, 256)

# Relative singular-value cutoff below which a channel is treated as
# rank deficient for inversion-based detectors.
_RANK_RCOND = 1e-13


# ---------------------------------------------------------------------------
# Gray-coded square QAM


def _bits_per_axis(order: int) -> int:
    if order not in _SUPPORTED_ORDERS:
        raise ScenarioError(f"modulation order must be one of {_SUPPORTED_ORDERS}")
    return int(math.log2(order)) // 2


def qam_scale(order: int) -> float:
    """Amplitude scale that normalises the constellation to unit
    average energy."""
    m = 1 << _bits_per_axis(order)
    return math.sqrt(3.0 / (2.0 * (m * m - 1.0)))


def _gray_decode(codes: np.ndarray, n_bits: int) -> np.ndarray:
    out = codes.copy()
    shift = 1
    while shift < n_bits:
        out ^= out >> shift
        shift *= 2
    return out


def _gray_encode(values: np.ndarray) -> np.ndarray:
    return values ^ (values >> 1)


def qam_mod(bits, order: int) -> np.ndarray:
    """Map a 0/1 bit stream onto Gray-coded square QAM symbols.

    Each symbol consumes log2(order) bits, the first half selecting the
    in-phase level (most significant bit first) and the second half the
    quadrature level. The constellation has unit average energy.
    """
    half = _bits_per_axis(order)
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size == 0 or b.size % (2 * half) != 0:
        raise ScenarioError(f"bit count must be a positive multiple of {2 * half}")
    if np.any((b != 0) & (b != 1)):
        raise ScenarioError("bits must be 0 or 1")
    groups = b.reshape(-1, 2 * half)
    weights = 1 << np.arange(half - 1, -1, -1)
    i_code = groups[:, :half] @ weights
    q_code = groups[:, half:] @ weights
    m = 1 << half
    i_level = 2 * _gray_decode(i_code, half) - (m - 1)
    q_level = 2 * _gray_decode(q_code, half) - (m - 1)
    return qam_scale(order) * (i_level + 1j * q_level)


def qam_hard_decide(symbols, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quantise noisy symbols to the nearest constellation point.

    Returns (points, indices): the decided complex points and an
    integer label per symbol (in-phase index * levels + quadrature
    index) that is convenient for symbol-error counting. Quantisation
    happens independently per axis, which for square QAM is exactly the
    nearest-neighbour rule.
    """
    half = _bits_per_axis(order)
    m = 1 << half
    s = np.asarray(symbols, dtype=complex)
    scale = qam_scale(order)
    i_idx = np.clip(np.rint((s.real / scale + (m - 1)) / 2.0), 0, m - 1).astype(np.int64)
    q_idx = np.clip(np.rint((s.imag / scale + (m - 1)) / 2.0), 0, m - 1).astype(np.int64)
    points = scale * ((2 * i_idx - (m - 1)) + 1j * (2 * q_idx - (m - 1)))
    return points, i_idx * m + q_idx


def qam_demod(symbols, order: int) -> np.ndarray:
    """Hard-decision demodulation back to the bit stream."""
    half = _bits_per_axis(order)
    m = 1 << half
    s = np.asarray(symbols, dtype=complex)
    scale = qam_scale(order)
    i_idx = np.clip(np.rint((s.real / scale + (m - 1)) / 2.0), 0, m - 1).astype(np.int64)
    q_idx = np.clip(np.rint((s.imag / scale + (m - 1)) / 2.0), 0, m - 1).astype(np.int64)
    i_code = _gray_encode(i_idx)
    q_code = _gray_encode(q_idx)
    bits = np.empty((s.size, 2 * half), dtype=np.int64)
    for pos in range(half):
        shift = half - 1 - pos
        bits[:, pos] = (i_code.ravel() >> shift) & 1
        bits[:, half + pos] = (q_code.ravel() >> shift) & 1
    return bits.ravel()


# ---------------------------------------------------------------------------
# detector weights


@dataclass(frozen=True)
class DetectorWeights:
    """Rows separate one user each from the antenna observation."""

    matrix: np.ndarray        # (K, M) complex
    detector: str
    noise_variance: float


def _channel_array(channel) -> np.ndarray:
    if isinstance(channel, ChannelMatrix):
        return channel.matrix
    h = np.asarray(channel, dtype=complex)
    if h.ndim != 2:
        raise ScenarioError("channel must be a users x antennas matrix")
    return h


def _tx_power_vector(tx_powers, n_users: int) -> np.ndarray:
    if tx_powers is None:
        return np.ones(n_users)
    p = np.asarray(tx_powers, dtype=float)
    if p.shape != (n_users,):
        raise ScenarioError("tx_powers must hold one linear power per user")
    if np.any(p <= 0):
        raise ScenarioError("tx_powers must be positive")
    return p


def mrc_weights(channel, noise_variance: float = 0.0) -> DetectorWeights:
    """Maximum-ratio combining: each row is the matched filter
    h_k^H / ||h_k||^2 for that user."""
    h = _channel_array(channel)
    norms = np.sum(np.abs(h) ** 2, axis=1)
    if np.any(norms == 0):
        raise RankDeficientChannelError("a user has an all-zero channel row")
    return DetectorWeights(h.conj() / norms[:, None], "mrc", noise_variance)


def zf_weights(channel, noise_variance: float = 0.0) -> DetectorWeights:
    """Zero forcing: the pseudo-inverse of the antennas x users channel.

    Raises RankDeficientChannelError when the channel does not have
    full column rank, for example when two users present identical
    rows or there are more users than antennas.
    """
    h = _channel_array(channel)
    k, m = h.shape
    if k > m:
        raise RankDeficientChannelError(
            f"{k} users cannot be zero-forced with {m} antennas")
    hc = h.T  # antennas x users
    u, s, vh = np.linalg.svd(hc, full_matrices=False)
    if s[0] == 0 or s[-1] <= s[0] * _RANK_RCOND * max(k, m):
        raise RankDeficientChannelError("channel matrix is rank deficient")
    w = (vh.conj().T * (1.0 / s)) @ u.conj().T
    return DetectorWeights(w, "zf", noise_variance)


def mmse_weights(channel, noise_variance: float,
                 tx_powers=None) -> DetectorWeights:
    """Linear minimum mean-square error detector.

    Solves (H^H H + sigma^2 P^-1)^-1 H^H with per-user transmit powers
    P, computed through the SVD of the power-scaled channel: with
    H sqrt(P) = U S V^H the weights are sqrt(P) V diag(s/(s^2+sigma^2)) U^H,
    which is algebraically identical but keeps the error proportional
    to the condition number instead of its square. With zero noise and
    a full-rank channel this reduces to zero forcing.
    """
    h = _channel_array(channel)
    k, m = h.shape
    if noise_variance < 0:
        raise ScenarioError("noise variance must be non-negative")
    p = _tx_power_vector(tx_powers, k)
    hp = h.T * np.sqrt(p)[None, :]          # antennas x users, power scaled
    u, s, vh = np.linalg.svd(hp, full_matrices=False)
    if noise_variance == 0.0:
        if s[0] == 0 or s[-1] <= s[0] * _RANK_RCOND * max(k, m):
            raise RankDeficientChannelError(
                "zero-noise mmse weights need a full-rank channel")
        gains = 1.0 / s
    else:
        gains = s / (s ** 2 + noise_variance)
    w = np.sqrt(p)[:, None] * ((vh.conj().T * gains) @ u.conj().T)
    return DetectorWeights(w, "mmse", noise_variance)


def make_weights(channel, detector: str, noise_variance: float,
                 tx_powers=None) -> DetectorWeights:
    if detector == "mrc":
        return mrc_weights(channel, noise_variance)
    if detector == "zf":
        return zf_weights(channel, noise_variance)
    if detector == "mmse":
        return mmse_weights(channel, noise_variance, tx_powers)
    raise ScenarioError(f"unknown detector '{detector}'")


def post_sinr(weights: Union[DetectorWeights, np.ndarray], channel,
              noise_variance: float, tx_powers=None) -> np.ndarray:
    """Post-detection SINR per user in dB.

    For user k with weight row w_k: the useful power is
    p_k |w_k^H h_k|^2, interference sums p_i |w_k^H h_i|^2 over other
    users, and noise contributes sigma^2 ||w_k||^2.
    """
    w = weights.matrix if isinstance(weights, DetectorWeights) else np.asarray(weights)
    h = _channel_array(channel)
    if w.shape[0] != h.shape[0] or w.shape[1] != h.shape[1]:
        raise ScenarioError("weights and channel must both be users x antennas")
    k = h.shape[0]
    p = _tx_power_vector(tx_powers, k)
    cross = w @ h.T                      # (K, K): row k = responses of user k's filter
    powers = np.abs(cross) ** 2 * p[None, :]
    signal = np.diag(powers).copy()
    interference = powers.sum(axis=1) - signal
    noise = noise_variance * np.sum(np.abs(w) ** 2, axis=1)
    denom = interference + noise
    if np.any(denom == 0):
        raise ScenarioError("SINR undefined: zero interference and zero noise")
    return 10.0 * np.log10(signal / denom)


# ---------------------------------------------------------------------------
# uncoded uplink simulation


@dataclass
class LinkReport:
    """Per-user outcome of an uncoded uplink run."""

    sinr_db: np.ndarray          # (K,) analytic post-detection SINR
    evm_percent: np.ndarray      # (K,) rms error vector vs nearest point
    ser: np.ndarray              # (K,) symbol error rate
    constellation: np.ndarray    # (K, n_kept) equalised received samples
    detector: str
    modulation_order: int
    n_symbols: int


def simulate_symbols(channel, detector: str, modulation_order: int,
                     noise_variance: float, n_symbols: int, seed=0,
                     tx_powers=None, keep_symbols: int = 500,
                     chunk: int = 4096) -> LinkReport:
    """Push random QAM frames through a narrowband channel and detect.

    Per-user symbol streams come from independent substreams spawned
    off the seed; the final substream drives the noise. Detection uses
    the analytic weights for the true channel, and the recovered
    symbols are equalised by each user's own effective complex gain
    before demodulation.
    """
    h = _channel_array(channel)
    k, m = h.shape
    if n_symbols < 1:
        raise ScenarioError("n_symbols must be positive")
    p = _tx_power_vector(tx_powers, k)
    weights = make_weights(h, detector, noise_variance, tx_powers)
    w = weights.matrix
    hc = h.T
    amps = np.sqrt(p)
    gains = np.diag(w @ (hc * amps[None, :]))   # effective per-user complex gain
    if np.any(np.abs(gains) == 0):
        raise RankDeficientChannelError("a user has zero effective gain after detection")

    children = np.random.SeedSequence(seed).spawn(k + 1)
    sym_rngs = [np.random.default_rng(c) for c in children[:k]]
    noise_rng = np.random.default_rng(children[k])

    bits_per = int(math.log2(modulation_order))
    errors = np.zeros(k, dtype=np.int64)
    err2_sum = np.zeros(k)
    kept: list[np.ndarray] = []
    n_keep = min(keep_symbols, n_symbols)
    sigma = math.sqrt(noise_variance / 2.0)

    done = 0
    while done < n_symbols:
        n = min(chunk, n_symbols - done)
        tx = np.empty((k, n), dtype=complex)
        for i in range(k):
            tx[i] = qam_mod(sym_rngs[i].integers(0, 2, n * bits_per),
                            modulation_order)
        y = (hc * amps[None, :]) @ tx
        if noise_variance > 0.0:
            y = y + sigma * (noise_rng.standard_normal((m, n))
                             + 1j * noise_rng.standard_normal((m, n)))
        est = (w @ y) / gains[:, None]
        decided, rx_label = qam_hard_decide(est, modulation_order)
        _, tx_label = qam_hard_decide(tx, modulation_order)
        errors += np.sum(rx_label != tx_label, axis=1)
        err2_sum += np.sum(np.abs(est - decided) ** 2, axis=1)
        if len(kept) * chunk < n_keep:
            kept.append(est[:, :min(n, n_keep - done)].copy())
        done += n

    constellation = np.concatenate(kept, axis=1) if kept else np.empty((k, 0), complex)
    evm = 100.0 * np.sqrt(err2_sum / n_symbols)   # constellation is unit energy
    return LinkReport(
        sinr_db=post_sinr(weights, h, noise_variance, tx_powers),
        evm_percent=evm,
        ser=errors / n_symbols,
        constellation=constellation[:, :n_keep],
        detector=detector,
        modulation_order=modulation_order,
        n_symbols=n_symbols,
    )


def uplink_sim(scn: Scenario, seed=0, n_symbols: Optional[int] = None,
               keep_symbols: int = 500) -> LinkReport:
    """Run the scenario's configured uplink and report per-user metrics.

    The link noise level is an SNR in dB relative to unit-power symbols
    over a unit-modulus channel entry, i.e. the per-antenna receive SNR
    of a single user before combining.
    """
    link = scn.link
    geometry = scn.build_geometry()
    placement = scn.build_placement()
    if link.model == "iid":
        cm = iid_rayleigh(placement.n_users, geometry.n_elements, seed=seed)
    else:
        cm = los_channel(geometry, placement, model=link.model,
                         amplitude_decay=link.amplitude_decay,
                         ue_polarisation=link.ue_polarisation, xpd=link.xpd)
    noise_variance = 10.0 ** (-link.snr_db / 10.0)
    n = link.n_symbols if n_symbols is None else n_symbols
    return simulate_symbols(cm, link.detector, link.modulation_order,
                            noise_variance, n, seed=seed,
                            keep_symbols=keep_symbols)
