"""Command-line front end.

Subcommands: simulate, hardening, powercontrol, analyze, locate, and
se-check. Every run writes delimited tables (CSV by default), rendered
figures, and a manifest into the output directory; each table row
carries the manifest's run id. Exit codes: 0 success, 2 configuration
error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import analysis, channel, detect, frame, hardening, locate, plots, scenario
from .errors import NumericalError, ScenarioError
from .reporting import (build_manifest, table_filename, write_manifest,
                        write_table)

# Reference operating bands checked by se-check.
_SE_12_BAND = (79.4, 0.2)
_SE_22_BAND = (145.6, 0.4)
_THROUGHPUT_BAND = (1.59e9, 0.01)   # centre, relative tolerance


def _error_line(category: str, message) -> None:
    text = " ".join(str(message).split())
    print(f"mmimosim: error: {category}: {text}", file=sys.stderr)


def _add_common(parser: argparse.ArgumentParser, scenario_required=True) -> None:
    if scenario_required:
        parser.add_argument("scenario", help="path to a YAML scenario file")
    else:
        parser.add_argument("scenario", nargs="?", default=None,
                            help="optional scenario file (defaults to the "
                                 "reference deployment)")
    parser.add_argument("--seed", type=int, default=0,
                        help="base random seed (default 0)")
    parser.add_argument("--out", default="mmimosim-out",
                        help="output directory (default ./mmimosim-out)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for parallelisable analysis "
                             "steps; never changes any output value")
    parser.add_argument("--format", choices=("csv", "structured-text"),
                        default="csv", dest="fmt",
                        help="delimited output format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmimosim",
        description="link-level simulator for a large-array TDD uplink")
    parser.add_argument("--version", action="version",
                        version=f"mmimosim {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="uncoded uplink over the scenario link")
    _add_common(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("hardening", help="fade-averaged Gram matrix diagnostics")
    _add_common(p)
    p.add_argument("--snapshots", type=int, default=100,
                   help="channel snapshots to average (default 100)")
    p.set_defaults(handler=_cmd_hardening)

    p = sub.add_parser("powercontrol", help="closed-loop power control run")
    _add_common(p)
    p.set_defaults(handler=_cmd_powercontrol)

    p = sub.add_parser("analyze", help="wideband channel analysis from pilots")
    _add_common(p)
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("locate", help="angle-of-arrival and TDOA positioning")
    _add_common(p)
    p.set_defaults(handler=_cmd_locate)

    p = sub.add_parser("se-check",
                       help="verify the frame's spectral-efficiency numbers")
    _add_common(p, scenario_required=False)
    p.set_defaults(handler=_cmd_se_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version and 2 for usage errors,
        # which matches the configuration-error code
        return 0 if exc.code in (0, None) else 2
    if args.threads < 1:
        _error_line("config", "--threads must be a positive integer")
        return 2
    try:
        return args.handler(args)
    except ScenarioError as exc:
        _error_line("config", exc)
        return 2
    except NumericalError as exc:
        _error_line("numerical", exc)
        return 3
    except OSError as exc:
        _error_line("io", exc)
        return 4


# ---------------------------------------------------------------------------
# shared run setup


def _load(args) -> tuple[scenario.Scenario, bytes, str]:
    if args.scenario is None:
        scn = scenario.default_scenario()
        raw = yaml.safe_dump(scenario.scenario_to_mapping(scn),
                             sort_keys=True).encode()
        return scn, raw, "<default>"
    raw = Path(args.scenario).read_bytes()
    return scenario.load_scenario(args.scenario), raw, str(args.scenario)


def _start(args, subcommand: str):
    scn, raw, label = _load(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = build_manifest(subcommand, label, raw, args.seed, args.threads,
                              args.fmt, __version__)
    write_manifest(manifest, out_dir / "manifest.txt")
    return scn, manifest, out_dir


def _table_path(out_dir: Path, stem: str, fmt: str) -> Path:
    return out_dir / table_filename(stem, fmt)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_simulate(args) -> int:
    scn, manifest, out_dir = _start(args, "simulate")
    report = detect.uplink_sim(scn, seed=args.seed)
    rid = manifest.run_id

    rows = [(rid, k + 1, report.detector, report.modulation_order,
             float(report.sinr_db[k]), float(report.evm_percent[k]),
             float(report.ser[k]))
            for k in range(report.sinr_db.size)]
    write_table(_table_path(out_dir, "link_report", args.fmt),
                ("run_id", "user", "detector", "modulation_order",
                 "sinr_db", "evm_percent", "ser"),
                rows, args.fmt)

    const_rows = []
    for k in range(report.constellation.shape[0]):
        for i, v in enumerate(report.constellation[k]):
            const_rows.append((rid, k + 1, i, float(v.real), float(v.imag)))
    write_table(_table_path(out_dir, "constellation", args.fmt),
                ("run_id", "user", "symbol_index", "re", "im"),
                const_rows, args.fmt)

    plots.save_constellation(report, out_dir / "constellation.png")
    print(f"simulate: {report.sinr_db.size} users, {report.detector} detection, "
          f"{report.modulation_order}-QAM, {report.n_symbols} symbols/user")
    print(f"simulate: mean SINR {report.sinr_db.mean():.2f} dB, "
          f"worst SER {report.ser.max():.3g}, "
          f"worst EVM {report.evm_percent.max():.3g}%")
    print(f"simulate: outputs in {out_dir}")
    return 0


def _cmd_hardening(args) -> int:
    scn, manifest, out_dir = _start(args, "hardening")
    if args.snapshots < 1:
        raise ScenarioError("--snapshots must be a positive integer")
    rid = manifest.run_id
    k = scn.system.n_users
    m = scn.system.n_bs_antennas
    geometry = scn.build_geometry()
    placement = scn.build_placement()

    snaps = []
    for i in range(args.snapshots):
        if scn.link.model == "iid":
            cm = channel.iid_rayleigh(k, m, seed=(args.seed, i))
        else:
            cm = channel.los_channel(geometry, placement, model=scn.link.model,
                                     amplitude_decay=scn.link.amplitude_decay,
                                     ue_polarisation=scn.link.ue_polarisation,
                                     xpd=scn.link.xpd)
        snaps.append(hardening.gram(cm))
    averaged = hardening.gram_average(snaps)
    ratio = hardening.hardening_ratio(averaged)
    off = averaged.matrix - np.diag(np.diag(averaged.matrix))
    max_off = float(np.max(np.abs(off)))
    lam_min = float(np.linalg.eigvalsh(averaged.matrix)[0])

    rows = []
    for i in range(k):
        for j in range(k):
            v = averaged.matrix[i, j]
            rows.append((rid, i + 1, j + 1, float(v.real), float(v.imag),
                         float(abs(v))))
    write_table(_table_path(out_dir, "gram", args.fmt),
                ("run_id", "row", "col", "re", "im", "magnitude"),
                rows, args.fmt)
    write_table(_table_path(out_dir, "hardening_summary", args.fmt),
                ("run_id", "n_bs_antennas", "n_users", "n_snapshots",
                 "max_offdiagonal", "lambda_min", "hardening_ratio"),
                [(rid, m, k, averaged.n_snapshots, max_off, lam_min, ratio)],
                args.fmt)
    plots.save_gram_heatmap(averaged, out_dir / "gram.png")
    print(f"hardening: {m} antennas, {k} users, {averaged.n_snapshots} snapshots")
    print(f"hardening: max off-diagonal {max_off:.4g}, smallest eigenvalue "
          f"{lam_min:.4g}, ratio {ratio:.4g}")
    print(f"hardening: outputs in {out_dir}")
    return 0


def _cmd_powercontrol(args) -> int:
    scn, manifest, out_dir = _start(args, "powercontrol")
    if scn.powercontrol is None:
        raise ScenarioError("scenario has no powercontrol section")
    pc = scn.powercontrol
    rid = manifest.run_id
    result = hardening.closed_loop_sim(
        n_bs_antennas=scn.system.n_bs_antennas,
        path_gains_db=np.asarray(pc.path_gains_db),
        algorithm=pc.algorithm,
        target_db=pc.target_db,
        n_iterations=pc.n_iterations,
        initial_power_dbm=pc.initial_power_dbm,
        noise_power_dbm=pc.noise_power_dbm,
        fading=pc.fading,
        detector=pc.detector,
        update_interval_slots=pc.update_interval_slots,
        interference_margin_db=pc.interference_margin_db,
        seed=args.seed,
    )

    rows = []
    n_iter, k = result.powers_dbm.shape
    for i in range(n_iter):
        for u in range(k):
            rows.append((rid, i + 1, u + 1, float(result.powers_dbm[i, u]),
                         float(result.measured_db[i, u]),
                         float(result.sinr_db[i, u]), result.algorithm))
    write_table(_table_path(out_dir, "trajectory", args.fmt),
                ("run_id", "iteration", "user", "tx_power_dbm", "measured_db",
                 "sinr_db", "algorithm"),
                rows, args.fmt)

    final_sinr = result.sinr_db[-1] if n_iter else np.full(k, np.nan)
    summary_rows = [(rid, u + 1,
                     float(result.powers_dbm[-1, u]) if n_iter else float("nan"),
                     float(final_sinr[u]))
                    for u in range(k)]
    write_table(_table_path(out_dir, "powercontrol_summary", args.fmt),
                ("run_id", "user", "final_power_dbm", "final_sinr_db"),
                summary_rows, args.fmt)
    plots.save_power_trajectory(result, out_dir / "trajectory.png")
    spread = float(final_sinr.max() - final_sinr.min()) if n_iter else float("nan")
    print(f"powercontrol: {result.algorithm}, {n_iter} iterations, "
          f"{result.n_updates} power updates")
    print(f"powercontrol: final SINR {np.array2string(final_sinr, precision=2)} dB "
          f"(target {pc.target_db} dB, spread {spread:.2f} dB)")
    print(f"powercontrol: outputs in {out_dir}")
    return 0


def _cmd_analyze(args) -> int:
    scn, manifest, out_dir = _start(args, "analyze")
    if scn.taps is None:
        raise ScenarioError("scenario has no taps section to analyse")
    rid = manifest.run_id
    cfg = scn.system
    geometry = scn.build_geometry()
    placement = scn.build_placement()
    grid = channel.full_grid(cfg.n_occupied, cfg.subcarrier_spacing)
    truth = channel.tapped_cfr(scn.taps, geometry, placement, grid)
    pmap = frame.pilot_map(cfg.n_users, cfg.n_occupied)
    estimate = frame.estimate_from_tensor(truth, pmap, seed=args.seed)
    interpolated = analysis.interpolate_cfr(estimate)

    profiles = [analysis.antenna_power_profile(interpolated, k)
                for k in range(cfg.n_users)]
    profile_rows = []
    for profile in profiles:
        for m, (lin, db) in enumerate(zip(profile.power_linear, profile.power_db)):
            profile_rows.append((rid, profile.user + 1, m + 1, float(lin), float(db)))
    write_table(_table_path(out_dir, "power_profile", args.fmt),
                ("run_id", "user", "antenna", "power_linear", "power_db"),
                profile_rows, args.fmt)

    profile_result = analysis.pdp_from_tensor(interpolated, user=0)
    pdp_rows = [(rid, float(d), float(p))
                for d, p in zip(profile_result.delays, profile_result.power)]
    write_table(_table_path(out_dir, "pdp", args.fmt),
                ("run_id", "delay_s", "power"), pdp_rows, args.fmt)

    bc_tight = analysis.across_array_coherence(interpolated, 0, 0.9,
                                               n_threads=args.threads)
    bc_loose = analysis.across_array_coherence(interpolated, 0, 0.5,
                                               n_threads=args.threads)
    coh_rows = [(rid, m + 1, float(bc_tight[m]), float(bc_loose[m]))
                for m in range(bc_tight.size)]
    write_table(_table_path(out_dir, "coherence", args.fmt),
                ("run_id", "antenna", "coherence_bw_hz_at_090",
                 "coherence_bw_hz_at_050"),
                coh_rows, args.fmt)

    summary_rows = []
    for k in range(cfg.n_users):
        user_pdp = analysis.pdp_from_tensor(interpolated, user=k)
        spread = analysis.rms_delay_spread(user_pdp)
        summary_rows.append((rid, k + 1, float(spread)))
    write_table(_table_path(out_dir, "analysis_summary", args.fmt),
                ("run_id", "user", "rms_delay_spread_s"),
                summary_rows, args.fmt)

    plots.save_power_profile(profiles, out_dir / "power_profile.png")
    plots.save_pdp(profile_result, out_dir / "pdp.png")
    lags, rho = analysis.correlation_curve(interpolated.cfr[:, 0, 0],
                                           cfg.subcarrier_spacing)
    plots.save_coherence(lags, rho, (0.9, 0.5), out_dir / "coherence.png")

    spread0 = summary_rows[0][2]
    print(f"analyze: {scn.taps.n_taps} taps, {cfg.n_users} users, "
          f"comb stride {pmap.stride}")
    print(f"analyze: user 1 rms delay spread {spread0 * 1e9:.1f} ns, "
          f"median coherence bw at 0.5 "
          f"{np.median(bc_loose) / 1e3 if np.isfinite(np.median(bc_loose)) else float('inf'):.1f} kHz")
    print(f"analyze: pilot noise-variance estimate {estimate.noise_var_estimate:.3g}")
    print(f"analyze: outputs in {out_dir}")
    return 0


def _cmd_locate(args) -> int:
    scn, manifest, out_dir = _start(args, "locate")
    if scn.locate is None:
        raise ScenarioError("scenario has no locate section")
    lc = scn.locate
    rid = manifest.run_id
    geometry = scn.build_geometry()
    grid = np.arange(lc.grid_start_deg, lc.grid_stop_deg + lc.grid_step_deg / 2,
                     lc.grid_step_deg)
    snapshots = locate.synth_snapshots(geometry, lc.azimuths_deg, lc.snr_db,
                                       lc.n_snapshots, seed=args.seed)

    arrays = [("full", geometry, snapshots)]
    if lc.n_subarrays > 1:
        size = geometry.n_elements // lc.n_subarrays
        for i, sub in enumerate(locate.subarray_split(geometry, lc.n_subarrays)):
            obs = snapshots.observations[:, i * size:(i + 1) * size]
            arrays.append((f"sub{i + 1}", sub, locate.SnapshotSet(obs, sub)))

    aoa_rows = []
    labelled_spectra = []
    for label, geom, snap in arrays:
        spectrum = locate.music_spectrum(locate.sample_covariance(snap), geom,
                                         lc.n_sources, grid)
        estimate = locate.aoa_estimate(spectrum, lc.n_sources)
        width = locate.peak_half_power_width(spectrum)
        labelled_spectra.append((f"{label} ({geom.n_elements})", spectrum))
        if label == "full":
            full_spectrum = spectrum
            full_estimate = estimate
        for rank, angle in enumerate(estimate.angles_deg):
            aoa_rows.append((rid, label, geom.n_elements, rank + 1,
                             float(angle), float(width)))
    write_table(_table_path(out_dir, "aoa", args.fmt),
                ("run_id", "array", "n_elements", "peak", "azimuth_deg",
                 "peak_width_deg"),
                aoa_rows, args.fmt)

    pas_rows = [(rid, float(a), float(v))
                for a, v in zip(full_spectrum.angles_deg, full_spectrum.values)]
    write_table(_table_path(out_dir, "pas", args.fmt),
                ("run_id", "angle_deg", "pseudospectrum"), pas_rows, args.fmt)
    plots.save_pseudospectrum(labelled_spectra, out_dir / "pas.png")

    exit_code = 0
    if lc.anchors_m is not None and lc.source_m is not None:
        problem = locate.tdoa_measure(np.asarray(lc.anchors_m),
                                      np.asarray(lc.source_m),
                                      noise_std=lc.tdoa_noise_s, seed=args.seed)
        initial = problem.anchors.mean(axis=0)
        solution = locate.tdoa_solve(problem, initial)
        error_m = float(np.linalg.norm(
            solution.position[:2] - np.asarray(lc.source_m)[:2]))
        write_table(_table_path(out_dir, "tdoa", args.fmt),
                    ("run_id", "x_m", "y_m", "z_m", "residual_s2", "converged",
                     "n_iterations", "error_m"),
                    [(rid, float(solution.position[0]),
                      float(solution.position[1]), float(solution.position[2]),
                      solution.residual, solution.converged,
                      solution.n_iterations, error_m)],
                    args.fmt)
        plots.save_tdoa_scene(problem, solution, out_dir / "tdoa.png",
                              source=lc.source_m)
        print(f"locate: tdoa estimate ({solution.position[0]:.2f}, "
              f"{solution.position[1]:.2f}) m, error {error_m:.3g} m, "
              f"converged {solution.converged}")
        if not solution.converged:
            _error_line("numerical", "tdoa solver did not converge")
            exit_code = 3

    peaks = ", ".join(f"{a:.3f}" for a in full_estimate.angles_deg)
    print(f"locate: MUSIC peaks at [{peaks}] deg from "
          f"{lc.n_snapshots} snapshots at {lc.snr_db:g} dB SNR")
    print(f"locate: outputs in {out_dir}")
    return exit_code


def _cmd_se_check(args) -> int:
    scn, manifest, out_dir = _start(args, "se-check")
    rid = manifest.run_id
    cfg = scn.system
    sched = scn.schedule
    bits = float(np.log2(scn.link.modulation_order))

    se_12 = frame.uncoded_sum_se(cfg.n_users, bits, sched, cfg)
    se_22 = frame.uncoded_sum_se(22, bits, sched, cfg)
    rate = frame.throughput_bps(se_12, cfg)

    checks = [
        (f"aggregate spectral efficiency ({cfg.n_users} users)", se_12,
         _SE_12_BAND[0], _SE_12_BAND[1], "bits/s/Hz"),
        ("aggregate spectral efficiency (22 users)", se_22,
         _SE_22_BAND[0], _SE_22_BAND[1], "bits/s/Hz"),
        ("sum throughput", rate, _THROUGHPUT_BAND[0],
         _THROUGHPUT_BAND[0] * _THROUGHPUT_BAND[1], "bits/s"),
    ]
    all_ok = True
    rows = []
    for name, value, centre, tol, unit in checks:
        ok = abs(value - centre) <= tol
        all_ok = all_ok and ok
        print(f"se-check: {name}: {value:.6g} {unit} "
              f"(expected {centre:g} +- {tol:g}): {'OK' if ok else 'MISMATCH'}")
        rows.append((rid, name, float(value), unit, float(centre), float(tol),
                     ok))
    write_table(_table_path(out_dir, "se_check", args.fmt),
                ("run_id", "quantity", "value", "unit", "expected", "tolerance",
                 "within_band"),
                rows, args.fmt)
    print(f"se-check: outputs in {out_dir}")
    if not all_ok:
        _error_line("numerical",
                    "computed rates fall outside the reference bands")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
