"""Matplotlib figure rendering for the report path.

Every function writes one PNG next to the delimited output and closes
the figure, so report generation never keeps GUI state alive. The Agg
backend is forced before pyplot loads.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def save_constellation(report, path) -> None:
    """Scatter the equalised received symbols of every user."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for k in range(report.constellation.shape[0]):
        pts = report.constellation[k]
        ax.plot(pts.real, pts.imag, ".", markersize=2, alpha=0.6,
                label=f"user {k + 1}" if report.constellation.shape[0] <= 12 else None)
    ax.set_xlabel("in-phase")
    ax.set_ylabel("quadrature")
    ax.set_title(f"{report.detector} detection, "
                 f"{report.modulation_order}-QAM")
    ax.grid(True, alpha=0.3)
    ax.set_aspect("equal")
    if report.constellation.shape[0] <= 12:
        ax.legend(loc="upper right", fontsize=6, markerscale=3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_gram_heatmap(gram_matrix, path) -> None:
    """Magnitude heatmap of a users x users Gram matrix."""
    fig, ax = plt.subplots(figsize=(6, 5))
    mag = np.abs(gram_matrix.matrix)
    im = ax.imshow(mag, cmap="viridis")
    ax.set_xlabel("user")
    ax.set_ylabel("user")
    ax.set_title(f"Gram magnitude ({gram_matrix.n_bs_antennas} antennas, "
                 f"{gram_matrix.n_snapshots} snapshots)")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_power_trajectory(result, path) -> None:
    """Per-user transmit power and SINR along a control loop run."""
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    iterations = np.arange(1, result.powers_dbm.shape[0] + 1)
    for k in range(result.powers_dbm.shape[1]):
        ax0.plot(iterations, result.powers_dbm[:, k], label=f"user {k + 1}")
        ax1.plot(iterations, result.sinr_db[:, k])
    ax0.set_ylabel("tx power (dBm)")
    ax0.set_title(f"{result.algorithm} power control")
    ax0.grid(True, alpha=0.3)
    ax0.legend(fontsize=7)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("post-detection SINR (dB)")
    ax1.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_power_profile(profiles, path) -> None:
    """Across-array received power, one curve per user."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for profile in profiles:
        ax.plot(np.arange(1, profile.power_db.size + 1), profile.power_db,
                label=f"user {profile.user + 1}")
    ax.set_xlabel("antenna")
    ax.set_ylabel("relative power (dB)")
    ax.set_title("received power across the array")
    ax.grid(True, alpha=0.3)
    if len(profiles) <= 12:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_pdp(result, path) -> None:
    """Power delay profile on a log scale."""
    fig, ax = plt.subplots(figsize=(7, 4))
    power_db = 10.0 * np.log10(np.maximum(result.power, 1e-30)
                               / max(result.power.max(), 1e-300))
    ax.plot(result.delays * 1e6, power_db)
    if result.alias_free_delay is not None:
        ax.axvline(result.alias_free_delay * 1e6, color="red", linestyle="--",
                   linewidth=1, label="alias-free limit")
        ax.legend(fontsize=7)
    ax.set_xlabel("delay (us)")
    ax.set_ylabel("relative power (dB)")
    ax.set_title(f"power delay profile ({result.window} window)")
    ax.set_ylim(bottom=-60)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_coherence(lags_hz, rho, thresholds, path) -> None:
    """Frequency autocorrelation with the evaluation thresholds."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(lags_hz / 1e6, rho)
    for thr in thresholds:
        ax.axhline(thr, linestyle="--", linewidth=1, color="gray")
    ax.set_xlabel("frequency separation (MHz)")
    ax.set_ylabel("|correlation|")
    ax.set_title("frequency autocorrelation")
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_pseudospectrum(spectra, path) -> None:
    """MUSIC pseudospectra in dB, one curve per (label, spectrum)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, spectrum in spectra:
        values_db = 10.0 * np.log10(spectrum.values / spectrum.values.max())
        ax.plot(spectrum.angles_deg, values_db, label=label, linewidth=1)
    ax.set_xlabel("azimuth (deg)")
    ax.set_ylabel("pseudospectrum (dB)")
    ax.set_title("MUSIC angular spectrum")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_tdoa_scene(problem, solution, path, source=None) -> None:
    """Plan view of anchors, the solved position, and the truth."""
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(problem.anchors[:, 0], problem.anchors[:, 1], "^",
            markersize=10, label="anchors")
    ax.plot(solution.position[0], solution.position[1], "x", markersize=12,
            label="estimate" + ("" if solution.converged else " (not converged)"))
    if source is not None:
        ax.plot(source[0], source[1], "o", markersize=8, fillstyle="none",
                label="true source")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title("TDOA multilateration")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
