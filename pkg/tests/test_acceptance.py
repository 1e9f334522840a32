"""Acceptance gate: one test and one printed verdict line per criterion.

Each test prints "[PASS]" or "[FAIL]" with a short label before the
assertion fires, so a plain pytest -s run reads as a checklist. The
checks exercise only public package APIs against independently derived
reference values.
"""

import math

import numpy as np

from mmimosim.channel import (ChannelMatrix, aoa_direction, fraunhofer_distance,
                              iid_rayleigh, los_channel, phase_aligned_distance,
                              spatial_signature, spherical_channel)
from mmimosim.cli import main
from mmimosim.detect import (mmse_weights, mrc_weights, post_sinr,
                             simulate_symbols, zf_weights)
from mmimosim.frame import default_schedule, throughput_bps, uncoded_sum_se
from mmimosim.hardening import (GramMatrix, closed_loop_sim, gram,
                                gram_average, hardening_ratio)
from mmimosim.locate import (aoa_estimate, music_spectrum,
                             peak_half_power_width, tdoa_measure, tdoa_solve)
from mmimosim.analysis import coherence_bandwidth, pdp
from mmimosim.scenario import default_config, make_ula, make_ura, place_ue_line


def _verdict(ok: bool, label: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}")
    assert ok, label


def test_criterion_01_spectral_efficiency_record():
    cfg = default_config()
    sched = default_schedule()
    se = uncoded_sum_se(12, 8, sched, cfg)
    rate = throughput_bps(se, cfg)
    ok = abs(se - 79.4) <= 0.2 and abs(rate - 1.59e9) <= 0.01 * 1.59e9
    _verdict(ok, f"12-user sum SE {se:.3f} bits/s/Hz in 79.4 +- 0.2 and "
                 f"throughput {rate:.4g} bits/s in 1.59e9 +- 1%")


def test_criterion_02_twenty_two_user_scaling():
    cfg = default_config()
    sched = default_schedule()
    se12 = uncoded_sum_se(12, 8, sched, cfg)
    se22 = uncoded_sum_se(22, 8, sched, cfg)
    ratio_exact = math.isclose(se22 / se12, 22 / 12, rel_tol=1e-12)
    ok = ratio_exact and abs(se22 - 145.6) <= 0.4
    _verdict(ok, f"22-user sum SE {se22:.3f} bits/s/Hz in 145.6 +- 0.4 with "
                 f"exact 22/12 scaling")


def test_criterion_03_array_aperture():
    aperture = make_ula(128, 3.5e9).aperture
    ok = abs(aperture - 5.44) <= 0.01
    _verdict(ok, f"128-element half-wavelength aperture {aperture:.4f} m "
                 f"in 5.44 +- 0.01")


def _averaged_gram_ratio(n_users, m, n_snapshots, seed):
    h = iid_rayleigh(n_users, m * n_snapshots, seed=seed).matrix
    g = (h @ h.conj().T) / n_snapshots
    return hardening_ratio(GramMatrix(g, n_snapshots, m))


def test_criterion_04_hardening_direction_and_law():
    # the concatenated-draw Gram average equals the per-snapshot average
    wide = iid_rayleigh(3, 4 * 5, seed=9).matrix
    blocks = [ChannelMatrix(np.ascontiguousarray(wide[:, 4 * i:4 * (i + 1)]),
                            "iid") for i in range(5)]
    slow = gram_average([gram(b) for b in blocks]).matrix
    fast = (wide @ wide.conj().T) / 5
    assert np.allclose(slow, fast, atol=1e-12)

    n_seeds, n_snapshots = 500, 100
    means = {}
    for m in (32, 112):
        ratios = [_averaged_gram_ratio(12, m, n_snapshots, seed=(211, m, s))
                  for s in range(n_seeds)]
        means[m] = float(np.mean(ratios))
    quotient = means[112] / means[32]
    expected = math.sqrt(32 / 112)
    ok = means[112] < means[32] and abs(quotient - expected) <= 0.1
    _verdict(ok, f"fade-averaged hardening ratio shrinks with antennas "
                 f"({means[32]:.3f} -> {means[112]:.3f}) and the quotient "
                 f"{quotient:.3f} is within 0.1 of sqrt(32/112) = {expected:.3f}")


def test_criterion_05_detector_dominance():
    noise_var = 0.1
    worst = math.inf
    for trial in range(100):
        h = iid_rayleigh(12, 128, seed=(5, trial))
        s_mmse = post_sinr(mmse_weights(h, noise_var), h, noise_var)
        s_zf = post_sinr(zf_weights(h), h, noise_var)
        s_mrc = post_sinr(mrc_weights(h), h, noise_var)
        worst = min(worst, float(np.min(s_mmse - s_zf)),
                    float(np.min(s_mmse - s_mrc)))
    ok = worst >= -1e-9
    _verdict(ok, f"per-user MMSE SINR >= ZF and MRC on 100 random 128x12 "
                 f"links (worst margin {worst:.3g} dB)")


def test_criterion_06_clean_dense_constellations():
    geometry = make_ura(4, 32, 0.5, 3.5e9)
    placement = place_ue_line(12, 2.5, 24.8, 3.5e9)
    channel = spherical_channel(geometry, placement)
    noise_var = 10.0 ** (-230.0 / 10.0)
    report = simulate_symbols(channel, "mmse", 256, noise_var, 100_000, seed=1)
    ok = bool(np.all(report.ser == 0.0))
    _verdict(ok, f"12-user 256-QAM MMSE uplink at high SNR has zero symbol "
                 f"errors over 1e5 symbols (worst SER {report.ser.max():g})")


def test_criterion_07_power_delay_profile_oracle():
    n, spacing = 1200, 15e3
    bin_s = 1.0 / (n * spacing)
    gains = (1.0, 0.5)
    bins = (0, 10)
    freqs = np.arange(n) * spacing
    cfr = sum(g * np.exp(-2j * np.pi * freqs * (b * bin_s))
              for g, b in zip(gains, bins))
    profile = pdp(cfr, spacing)
    peak_err_db = max(abs(10 * math.log10(profile.power[b] / g ** 2))
                      for g, b in zip(gains, bins))
    rest = np.delete(profile.power, bins)
    parseval = abs(profile.power.sum() - np.mean(np.abs(cfr) ** 2))
    ok = (peak_err_db <= 0.1 and float(rest.max()) < 1e-12
          and parseval <= 1e-9 * np.mean(np.abs(cfr) ** 2)
          and profile.delays[bins[1]] == 10 * bin_s)
    _verdict(ok, f"two-tap delay profile recovered at bins {bins} with peak "
                 f"error {peak_err_db:.2g} dB and Parseval gap {parseval:.2g}")


def test_criterion_08_coherence_bandwidth_law():
    n, spacing = 1200, 15e3
    freqs = np.arange(n) * spacing
    worst = 0.0
    for tau in (0.5e-6, 1.0e-6, 2.0e-6):
        cfr = 1.0 + np.exp(-2j * np.pi * freqs * tau)
        bc = coherence_bandwidth(cfr, 0.5, spacing)
        worst = max(worst, abs(bc - 1.0 / (3.0 * tau)))
    ok = worst <= spacing
    _verdict(ok, f"equal two-tap 0.5-coherence bandwidth matches 1/(3 tau) "
                 f"within one 15 kHz step (worst gap {worst:.4g} Hz)")


def test_criterion_09_spherical_to_planar_convergence():
    geometry = make_ula(128, 3.5e9)
    far = fraunhofer_distance(geometry)
    errors = []
    for factor in (1.0, 3.0, 10.0, 30.0, 100.0):
        placement = place_ue_line(1, 2.5, factor * far, 3.5e9)
        sph = los_channel(geometry, placement, model="spherical").matrix[0]
        pla = los_channel(geometry, placement, model="planar").matrix[0]
        errors.append(phase_aligned_distance(sph, pla))
    ok = (all(a > b for a, b in zip(errors, errors[1:]))
          and errors[-1] < 1e-2)
    _verdict(ok, f"spherical rows converge monotonically to the planar model "
                 f"past the far-field boundary (error {errors[-1]:.3g} at "
                 f"100x, {errors[0]:.3g} at 1x)")


def test_criterion_10_sharp_aoa_peaks():
    source = 20.003
    grid = np.arange(10.0, 30.0001, 0.01)
    widths = {}
    estimate = None
    for m in (32, 128):
        geometry = make_ula(m, 3.5e9)
        steer = spatial_signature(geometry, aoa_direction(source)).coefficients
        covariance = np.outer(steer, steer.conj())
        spectrum = music_spectrum(covariance, geometry, 1, grid)
        widths[m] = peak_half_power_width(spectrum)
        if m == 128:
            estimate = aoa_estimate(spectrum, 1).angles_deg[0]
    ok = abs(estimate - source) <= 0.1 and widths[128] < widths[32]
    _verdict(ok, f"noiseless 128-element pseudospectrum peaks at "
                 f"{estimate:.4f} deg for a {source} deg source and sharpens "
                 f"with aperture ({widths[32]:.2f} -> {widths[128]:.2f} deg)")


def test_criterion_11_tdoa_exact_and_noisy():
    triangle = np.array([[0.0, 0.0, 0.0], [60.0, 0.0, 0.0], [0.0, 60.0, 0.0]])
    source = np.array([21.3, 37.9, 0.0])
    solution = tdoa_solve(tdoa_measure(triangle, source), [20.0, 20.0])
    exact_err = float(np.linalg.norm(solution.position - source))

    square = np.array([[0.0, 0.0, 0.0], [60.0, 0.0, 0.0],
                       [0.0, 60.0, 0.0], [60.0, 60.0, 0.0]])
    errors = []
    for trial in range(500):
        rng = np.random.default_rng((77, trial))
        target = np.array([rng.uniform(5.0, 55.0), rng.uniform(5.0, 55.0), 0.0])
        problem = tdoa_measure(square, target, noise_std=1e-9, seed=(78, trial))
        noisy = tdoa_solve(problem, [30.0, 30.0])
        errors.append(float(np.linalg.norm(noisy.position[:2] - target[:2])))
    median_err = float(np.median(errors))
    ok = solution.converged and exact_err <= 1e-6 and median_err < 1.0
    _verdict(ok, f"noiseless three-anchor solve lands within "
                 f"{exact_err:.2g} m and the 1 ns-noise median error is "
                 f"{median_err:.3f} m over 500 trials")


def test_criterion_12_power_control_convergence_and_overhead():
    common = dict(n_bs_antennas=128, path_gains_db=np.array([0.0, -20.0]),
                  target_db=10.0, n_iterations=30, initial_power_dbm=0.0,
                  noise_power_dbm=0.0, fading="static", detector="mmse",
                  seed=0)
    fixed = closed_loop_sim(algorithm="fixed_sinr", **common)
    within = np.max(np.abs(fixed.sinr_db - 10.0), axis=1) <= 0.1
    first_hit = int(np.argmax(within)) + 1 if within.any() else None
    hard = closed_loop_sim(algorithm="hardening", update_interval_slots=10,
                           **common)
    ok = (bool(within[-1]) and first_hit is not None and first_hit <= 30
          and hard.n_updates <= fixed.n_updates / 10)
    _verdict(ok, f"20 dB near-far loop reaches 10 dB +- 0.1 at iteration "
                 f"{first_hit} and the statistics-driven loop issues "
                 f"{hard.n_updates} updates against {fixed.n_updates}")


_DETERMINISM_SCENARIO = """\
system:
  bandwidth_hz: 2.0e+6
  sampling_rate_hz: 1.92e+6
  n_fft: 128
  n_occupied: 96
  n_bs_antennas: 32
  n_users: 4
array:
  kind: ula
  n_elements: 32
users:
  n_users: 4
link:
  model: spherical
  modulation_order: 16
  snr_db: 20.0
  n_symbols: 1000
taps:
  - {delay_s: 0.0, gain_re: 1.0}
  - {delay_s: 1.0e-6, gain_re: 0.5}
"""

_ANALYZE_TABLES = ("power_profile.csv", "pdp.csv", "coherence.csv",
                   "analysis_summary.csv")


def test_criterion_13_deterministic_reports(tmp_path):
    scn = tmp_path / "scn.yaml"
    scn.write_text(_DETERMINISM_SCENARIO)
    outs = [tmp_path / name for name in ("a", "b", "c")]
    for out, threads in zip(outs, ("1", "4", "4")):
        code = main(["analyze", str(scn), "--out", str(out),
                     "--threads", threads])
        assert code == 0
    identical = all((outs[0] / t).read_bytes() == (out / t).read_bytes()
                    for t in _ANALYZE_TABLES for out in outs[1:])
    for out, threads in zip(outs[:2], ("2", "3")):
        assert main(["simulate", str(scn), "--out", str(out),
                     "--threads", threads]) == 0
    identical = identical and (
        (outs[0] / "link_report.csv").read_bytes()
        == (outs[1] / "link_report.csv").read_bytes())
    _verdict(identical, "report tables are byte-identical across reruns and "
                        "thread counts")
