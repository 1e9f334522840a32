"""Gram-matrix hardening diagnostics and closed-loop power control.

As the antenna count grows, user channels become nearly orthogonal and
the Gram matrix H H^H concentrates on its diagonal. The hardening
ratio tracked here (largest off-diagonal magnitude over the smallest
eigenvalue) shrinks like 1/sqrt(M) for independent Rayleigh channels
once Gram matrices are averaged over fades, which is also how measured
ones are usually reported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ScenarioError
from .channel import ChannelMatrix, iid_rayleigh
from .detect import make_weights, post_sinr


# ---------------------------------------------------------------------------
# gram matrices


@dataclass(frozen=True)
class GramMatrix:
    """users x users Gram matrix with averaging provenance."""

    matrix: np.ndarray
    n_snapshots: int
    n_bs_antennas: int

    @property
    def n_users(self) -> int:
        return self.matrix.shape[0]


def gram(channel) -> GramMatrix:
    """H H^H of one channel snapshot, explicitly Hermitised."""
    h = channel.matrix if isinstance(channel, ChannelMatrix) else np.asarray(channel, complex)
    if h.ndim != 2:
        raise ScenarioError("channel must be a users x antennas matrix")
    g = h @ h.conj().T
    g = (g + g.conj().T) / 2.0
    return GramMatrix(g, n_snapshots=1, n_bs_antennas=h.shape[1])


def gram_average(items: Sequence) -> GramMatrix:
    """Element-wise complex mean of Gram matrices.

    Accepts GramMatrix instances, ChannelMatrix instances, or raw
    channel arrays; channels are turned into single-snapshot grams
    first. All inputs must share the user count and antenna count.
    """
    if len(items) == 0:
        raise ScenarioError("cannot average an empty collection of grams")
    grams = [item if isinstance(item, GramMatrix) else gram(item) for item in items]
    shape = grams[0].matrix.shape
    m = grams[0].n_bs_antennas
    for g in grams[1:]:
        if g.matrix.shape != shape or g.n_bs_antennas != m:
            raise ScenarioError("gram dimensions must match to average")
    total = sum(g.n_snapshots for g in grams)
    acc = np.zeros(shape, dtype=complex)
    for g in grams:
        acc += g.matrix * g.n_snapshots
    return GramMatrix(acc / total, n_snapshots=total, n_bs_antennas=m)


def hardening_ratio(g: GramMatrix) -> float:
    """Largest off-diagonal magnitude over the smallest eigenvalue.

    Small values mean the users are nearly orthogonal and the diagonal
    dominates. A singular Gram matrix yields +inf with a warning.
    """
    mat = g.matrix
    if mat.shape[0] < 2:
        raise ScenarioError("hardening ratio needs at least two users")
    off = mat - np.diag(np.diag(mat))
    max_off = float(np.max(np.abs(off)))
    eigenvalues = np.linalg.eigvalsh(mat)
    lam_min = float(eigenvalues[0])
    if lam_min <= 0.0:
        warnings.warn("gram matrix is singular; hardening ratio is unbounded")
        return math.inf
    return max_off / lam_min


def hardening_snapshot_ratio(n_bs_antennas: int, n_users: int,
                             n_snapshots: int, seed=0) -> float:
    """Hardening ratio of a fade-averaged i.i.d. Rayleigh Gram matrix."""
    snaps = [gram(iid_rayleigh(n_users, n_bs_antennas, seed=(seed, i)))
             for i in range(n_snapshots)]
    return hardening_ratio(gram_average(snaps))


# ---------------------------------------------------------------------------
# power control


@dataclass(frozen=True)
class PowerControlState:
    """Closed-loop transmit power state for all users.

    Power commands move at most max_step_db per update and the
    resulting powers stay inside [min_dbm, max_dbm]. The slot counter
    advances on every call; the hardening-rate loop only recomputes
    powers when the counter hits its update interval. History holds
    (slot, powers_dbm, measurement) tuples and is append-only.
    """

    powers_dbm: np.ndarray
    target_db: float
    min_dbm: float = -40.0
    max_dbm: float = 23.0
    max_step_db: float = 1.0
    update_interval_slots: int = 1
    noise_power_dbm: float = 0.0
    interference_margin_db: float = 0.0
    slot: int = 0
    n_updates: int = 0
    history: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.powers_dbm, dtype=float)
        object.__setattr__(self, "powers_dbm", p)
        problems = []
        if p.ndim != 1 or p.size < 1:
            problems.append("powers_dbm must be a 1-D array with one entry per user")
        if not self.min_dbm < self.max_dbm:
            problems.append("power bounds must satisfy min_dbm < max_dbm")
        if not self.max_step_db > 0:
            problems.append("max_step_db must be positive")
        if not (isinstance(self.update_interval_slots, int)
                and self.update_interval_slots >= 1):
            problems.append("update_interval_slots must be a positive integer")
        if problems:
            raise ScenarioError("; ".join(problems))
        if p.ndim == 1 and (np.any(p < self.min_dbm) or np.any(p > self.max_dbm)):
            raise ScenarioError("initial powers must respect the power bounds")

    @property
    def n_users(self) -> int:
        return self.powers_dbm.size


def _advance(state: PowerControlState, new_powers: np.ndarray, measurement,
             updated: bool) -> PowerControlState:
    entry = (state.slot, new_powers.copy(), np.array(measurement, dtype=float))
    return replace(state,
                   powers_dbm=new_powers,
                   slot=state.slot + 1,
                   n_updates=state.n_updates + (1 if updated else 0),
                   history=state.history + (entry,))


def _tracking_step(state: PowerControlState, measured_db) -> PowerControlState:
    measured = np.asarray(measured_db, dtype=float)
    if measured.shape != state.powers_dbm.shape:
        raise ScenarioError("one measurement per user is required")
    step = np.clip(state.target_db - measured,
                   -state.max_step_db, state.max_step_db)
    powers = np.clip(state.powers_dbm + step, state.min_dbm, state.max_dbm)
    return _advance(state, powers, measured, updated=True)


def pc_fixed_snr(state: PowerControlState, measured_snr_db) -> PowerControlState:
    """One slot of the fixed-SNR loop: steer each user's received SNR
    towards the common target, one clamped step per slot."""
    return _tracking_step(state, measured_snr_db)


def pc_fixed_sinr(state: PowerControlState, measured_sinr_db) -> PowerControlState:
    """One slot of the fixed-SINR loop.

    Identical update rule to the fixed-SNR loop but fed with
    post-detection SINR, so it reacts to interference as well as to
    path loss.
    """
    return _tracking_step(state, measured_sinr_db)


def pc_hardening(state: PowerControlState, long_term_gains) -> PowerControlState:
    """Hardening-rate power control driven by large-scale gains only.

    Because a large array averages out fast fading, the per-user
    received power is predictable from the slowly varying channel
    energy ||h_k||^2. Powers are recomputed only every
    update_interval_slots slots (which must be coarser than the
    per-slot cadence of the tracking loops) to meet the target SNR plus
    a configurable interference margin; other slots leave them
    untouched. Steps are not clamped: the input is already slow.
    """
    if state.update_interval_slots < 2:
        raise ScenarioError("hardening-rate control needs update_interval_slots >= 2")
    gains = np.asarray(long_term_gains, dtype=float)
    if gains.shape != state.powers_dbm.shape:
        raise ScenarioError("one long-term gain per user is required")
    if np.any(gains <= 0):
        raise ScenarioError("long-term gains must be positive")
    if state.slot % state.update_interval_slots == 0:
        wanted = (state.target_db + state.noise_power_dbm
                  + state.interference_margin_db - 10.0 * np.log10(gains))
        powers = np.clip(wanted, state.min_dbm, state.max_dbm)
        return _advance(state, powers, 10.0 * np.log10(gains), updated=True)
    return _advance(state, state.powers_dbm, 10.0 * np.log10(gains), updated=False)


# ---------------------------------------------------------------------------
# closed-loop simulation


@dataclass
class LoopResult:
    """Trajectory of one closed-loop power control run."""

    algorithm: str
    powers_dbm: np.ndarray     # (n_iterations, K) after each update
    measured_db: np.ndarray    # (n_iterations, K) input to each update
    sinr_db: np.ndarray        # (n_iterations, K) post-update detector SINR
    n_updates: int
    state: PowerControlState


def closed_loop_sim(n_bs_antennas: int, path_gains_db, algorithm: str,
                    target_db: float, n_iterations: int,
                    initial_power_dbm: float = 0.0,
                    noise_power_dbm: float = 0.0, fading: str = "static",
                    detector: str = "mmse", update_interval_slots: int = 10,
                    interference_margin_db: float = 0.0,
                    seed=0) -> LoopResult:
    """Simulate a power control loop over an i.i.d. Rayleigh channel.

    Each user k has a fixed large-scale gain path_gains_db[k]; static
    fading draws the small-scale channel once, while 'iid' redraws it
    every slot. Every iteration measures the loop's input (received
    SNR, post-detection SINR, or long-term channel energy), applies the
    chosen update, and records the post-update detector SINR.
    """
    gains_db = np.asarray(path_gains_db, dtype=float)
    if gains_db.ndim != 1 or gains_db.size < 1:
        raise ScenarioError("path_gains_db must be a 1-D per-user array")
    if algorithm not in ("fixed_snr", "fixed_sinr", "hardening"):
        raise ScenarioError(f"unknown power control algorithm '{algorithm}'")
    if fading not in ("static", "iid"):
        raise ScenarioError(f"unknown fading mode '{fading}'")
    if n_iterations < 0:
        raise ScenarioError("n_iterations must be non-negative")
    k = gains_db.size
    amplitude = 10.0 ** (gains_db / 20.0)
    noise_var = 10.0 ** (noise_power_dbm / 10.0)
    interval = update_interval_slots if algorithm == "hardening" else 1
    state = PowerControlState(
        powers_dbm=np.full(k, float(initial_power_dbm)),
        target_db=float(target_db),
        update_interval_slots=interval,
        noise_power_dbm=noise_power_dbm,
        interference_margin_db=interference_margin_db,
    )

    def draw(i):
        h = iid_rayleigh(k, n_bs_antennas, seed=(seed, i)).matrix
        return h * amplitude[:, None]

    h = draw(0)
    powers_hist = np.empty((n_iterations, k))
    measured_hist = np.empty((n_iterations, k))
    sinr_hist = np.empty((n_iterations, k))
    energy_sum = np.zeros(k)

    def detector_sinr(channel, powers_dbm):
        p_lin = 10.0 ** (powers_dbm / 10.0)
        w = make_weights(channel, detector, noise_var, tx_powers=p_lin)
        return post_sinr(w, channel, noise_var, tx_powers=p_lin)

    for i in range(n_iterations):
        if fading == "iid" and i > 0:
            h = draw(i)
        energy = np.sum(np.abs(h) ** 2, axis=1)
        energy_sum += energy
        p_lin = 10.0 ** (state.powers_dbm / 10.0)
        if algorithm == "fixed_snr":
            measured = 10.0 * np.log10(p_lin * energy / noise_var)
            state = pc_fixed_snr(state, measured)
        elif algorithm == "fixed_sinr":
            measured = detector_sinr(h, state.powers_dbm)
            state = pc_fixed_sinr(state, measured)
        else:
            long_term = energy_sum / (i + 1)
            measured = 10.0 * np.log10(long_term)
            state = pc_hardening(state, long_term)
        powers_hist[i] = state.powers_dbm
        measured_hist[i] = measured
        sinr_hist[i] = detector_sinr(h, state.powers_dbm)

    return LoopResult(algorithm=algorithm, powers_dbm=powers_hist,
                      measured_db=measured_hist, sinr_db=sinr_hist,
                      n_updates=state.n_updates, state=state)
