"""Pilot allocation, least-squares channel estimation, and the
spectral-efficiency bookkeeping of the TDD uplink frame.

Each client owns an interleaved comb of pilot tones: user k (1-based)
transmits on occupied subcarriers k-1, k-1+12, k-1+24, ... so twelve
single-antenna clients sound the whole band simultaneously without
colliding, at a resolution of one resource block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ScenarioError
from .scenario import SystemConfig
from .channel import ChannelTensor


@dataclass(frozen=True)
class PilotMap:
    """Disjoint comb allocation of pilot tones to users."""

    assignments: tuple[tuple[int, ...], ...]
    n_occupied: int
    stride: int = 12

    @property
    def n_users(self) -> int:
        return len(self.assignments)

    def offsets(self) -> tuple[int, ...]:
        return tuple(a[0] for a in self.assignments)


def pilot_map(n_users: int, n_occupied: int, stride: int = 12) -> PilotMap:
    """Comb pilot allocation: user k keeps tones k-1, k-1+stride, ...

    With n_users equal to the stride the combs partition every
    occupied tone; fewer users simply leave some combs idle.
    """
    if not (isinstance(n_users, int) and 1 <= n_users <= stride):
        raise ScenarioError(f"n_users must lie in [1, {stride}] for a "
                            f"stride-{stride} pilot comb")
    if not (isinstance(n_occupied, int) and n_occupied >= stride):
        raise ScenarioError("n_occupied must be at least one full stride")
    assignments = tuple(tuple(range(k, n_occupied, stride))
                        for k in range(n_users))
    return PilotMap(assignments, n_occupied, stride)


@dataclass(frozen=True)
class FrameSchedule:
    """Symbol budget of one 10 ms radio frame.

    The reference schedule runs 7 OFDM symbols per 0.5 ms slot over 20
    slots (140 symbols), spends 2 symbols on uplink pilots, none on
    downlink, and the remaining 138 on uplink data.
    """

    symbols_per_slot: int = 7
    slots_per_frame: int = 20
    ul_pilot_symbols_per_frame: int = 2
    ul_data_symbols_per_frame: int = 138
    dl_symbols_per_frame: int = 0

    def __post_init__(self):
        problems = []
        for name in ("symbols_per_slot", "slots_per_frame"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 1):
                problems.append(f"schedule.{name} must be a positive integer")
        for name in ("ul_pilot_symbols_per_frame", "ul_data_symbols_per_frame",
                     "dl_symbols_per_frame"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 0):
                problems.append(f"schedule.{name} must be a non-negative integer")
        if not problems:
            used = (self.ul_pilot_symbols_per_frame
                    + self.ul_data_symbols_per_frame
                    + self.dl_symbols_per_frame)
            total = self.symbols_per_slot * self.slots_per_frame
            if used > total:
                problems.append(
                    f"schedule allocates {used} symbols but the frame only has {total}")
        if problems:
            raise ScenarioError("; ".join(problems))

    @property
    def symbols_per_frame(self) -> int:
        return self.symbols_per_slot * self.slots_per_frame


def default_schedule() -> FrameSchedule:
    return FrameSchedule()


@dataclass(frozen=True)
class EstimatedCfr:
    """Per-user channel estimates on each user's pilot comb.

    values[k, i, m] estimates the response of antenna m at the i-th
    comb tone of user k. noise_var_estimate is derived from adjacent
    comb-tone differences and is nan when a comb has fewer than two
    tones.
    """

    values: np.ndarray          # (K, n_comb, M) complex
    pilot_map: PilotMap
    noise_var_estimate: float
    subcarrier_spacing: float


def ls_estimate(rx_pilots: np.ndarray, known_pilots: np.ndarray,
                pmap: PilotMap, subcarrier_spacing: float) -> EstimatedCfr:
    """Per-tone least-squares channel estimate from one pilot symbol.

    rx_pilots holds the received frequency-domain symbol, tones x
    antennas; known_pilots the transmitted pilot value on every
    occupied tone. Division happens only on each user's own comb, so
    the disjoint allocation keeps users separable. Zero-valued pilots
    on an assigned tone are rejected.
    """
    rx = np.asarray(rx_pilots, dtype=complex)
    tx = np.asarray(known_pilots, dtype=complex)
    if rx.ndim != 2 or rx.shape[0] != pmap.n_occupied:
        raise ScenarioError("rx_pilots must be an (n_occupied, n_antennas) array")
    if tx.shape != (pmap.n_occupied,):
        raise ScenarioError("known_pilots must cover every occupied tone")
    n_comb = len(pmap.assignments[0])
    est = np.empty((pmap.n_users, n_comb, rx.shape[1]), dtype=complex)
    for k, tones in enumerate(pmap.assignments):
        tone_idx = np.asarray(tones)
        ref = tx[tone_idx]
        if np.any(ref == 0):
            raise ScenarioError(f"zero pilot symbol on a tone assigned to user {k + 1}")
        est[k] = rx[tone_idx, :] / ref[:, None]
    if n_comb >= 2:
        diffs = est[:, 1:, :] - est[:, :-1, :]
        noise_var = float(np.mean(np.abs(diffs) ** 2) / 2.0)
    else:
        noise_var = float("nan")
    return EstimatedCfr(est, pmap, noise_var, subcarrier_spacing)


def estimate_from_tensor(tensor: ChannelTensor, pmap: PilotMap,
                         noise_variance: float = 0.0, seed=0) -> EstimatedCfr:
    """Sound a dense-grid tensor with unit pilots and estimate it back.

    Builds the received pilot symbol each user's comb would produce
    (every user transmits simultaneously on its own tones), adds white
    noise at the given variance per antenna, and runs ls_estimate.
    """
    if tensor.grid.stride != 1:
        raise ScenarioError("pilot sounding needs a dense-grid tensor")
    if tensor.grid.n_occupied != pmap.n_occupied:
        raise ScenarioError("tensor grid and pilot map disagree on n_occupied")
    if tensor.n_users != pmap.n_users:
        raise ScenarioError("tensor user axis and pilot map disagree")
    n_occ, m, _ = tensor.cfr.shape
    rx = np.zeros((n_occ, m), dtype=complex)
    for k, tones in enumerate(pmap.assignments):
        tone_idx = np.asarray(tones)
        rx[tone_idx, :] = tensor.cfr[tone_idx, :, k]
    if noise_variance > 0.0:
        rng = np.random.default_rng(seed)
        rx = rx + math.sqrt(noise_variance / 2.0) * (
            rng.standard_normal(rx.shape) + 1j * rng.standard_normal(rx.shape))
    pilots = np.ones(n_occ, dtype=complex)
    return ls_estimate(rx, pilots, pmap, tensor.grid.subcarrier_spacing)


# ---------------------------------------------------------------------------
# rate accounting


def uncoded_sum_se(n_users: int, bits_per_symbol: float,
                   schedule: FrameSchedule, config: SystemConfig) -> float:
    """Aggregate uncoded spectral efficiency in bits/s/Hz.

    Counts every uplink data resource element in one frame (users x
    bits per QAM symbol x occupied subcarriers x data symbols) against
    the frame duration and occupied bandwidth. Pilot and downlink
    symbols carry no uplink payload and reduce the result.
    """
    if n_users < 0 or bits_per_symbol < 0:
        raise ScenarioError("n_users and bits_per_symbol must be non-negative")
    bits = (n_users * bits_per_symbol * config.n_occupied
            * schedule.ul_data_symbols_per_frame)
    return bits / (config.frame_duration * config.bandwidth)


def throughput_bps(spectral_efficiency: float, config: SystemConfig) -> float:
    """Sum rate in bits/s implied by a spectral efficiency."""
    return spectral_efficiency * config.bandwidth
