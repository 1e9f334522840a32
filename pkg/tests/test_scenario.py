"""System configuration, array geometry, placement, and scenario files."""

import math

import numpy as np
import pytest

from mmimosim import scenario
from mmimosim.errors import ScenarioError
from mmimosim.scenario import (SPEED_OF_LIGHT, ArrayGeometry, SystemConfig,
                               default_config, default_scenario, load_scenario,
                               make_ula, make_ura, place_ue_line,
                               save_scenario)


def test_default_config_reference_values():
    cfg = default_config()
    assert cfg.carrier_freq == 3.51e9
    assert cfg.bandwidth == 20e6
    assert cfg.sampling_rate == 30.72e6
    assert cfg.subcarrier_spacing == 15e3
    assert cfg.n_fft == 2048
    assert cfg.n_occupied == 1200
    assert cfg.frame_duration == 0.01
    assert cfg.subframe_duration == 1e-3
    assert cfg.slot_duration == 0.5e-3
    assert cfg.tdd_period_slots == 1
    assert cfg.n_bs_antennas == 128
    assert cfg.n_users == 12
    assert cfg.slots_per_frame == 20


def test_sampling_rate_ties_fft_to_spacing():
    cfg = default_config()
    assert cfg.sampling_rate == cfg.n_fft * cfg.subcarrier_spacing


def test_wavelength():
    cfg = default_config()
    assert cfg.wavelength == pytest.approx(SPEED_OF_LIGHT / 3.51e9)


def test_invalid_config_lists_every_violation():
    with pytest.raises(ScenarioError) as err:
        SystemConfig(sampling_rate=30e6, bandwidth=-1.0)
    message = str(err.value)
    assert "sampling_rate" in message
    assert "bandwidth" in message


def test_occupied_tones_cannot_exceed_fft():
    with pytest.raises(ScenarioError, match="n_occupied"):
        SystemConfig(n_fft=1024, n_occupied=1200,
                     sampling_rate=1024 * 15e3)


def test_frame_must_be_twenty_slots():
    with pytest.raises(ScenarioError, match="20 slots"):
        SystemConfig(slot_duration=1e-3)


# ---------------------------------------------------------------------------
# linear array


def test_ula_aperture_of_reference_array():
    geom = make_ula(128, 3.5e9)
    assert geom.aperture == pytest.approx(5.44, abs=0.01)
    assert geom.n_elements == 128


def test_ula_pitch_is_half_the_build_wavelength():
    geom = make_ula(128, 3.5e9)
    spacing = SPEED_OF_LIGHT / 3.5e9 / 2
    gaps = np.linalg.norm(np.diff(geom.positions, axis=0), axis=1)
    assert np.allclose(gaps, spacing, rtol=1e-12, atol=0.0)


def test_ula_is_centred_and_collinear():
    geom = make_ula(16, 3.5e9)
    assert np.allclose(geom.centroid, 0.0, atol=1e-12)
    assert np.all(geom.positions[:, 1:] == 0.0)


def test_ula_single_element():
    geom = make_ula(1, 3.5e9)
    assert geom.aperture == 0.0
    assert np.allclose(geom.positions, 0.0)


def test_ula_construction_is_deterministic():
    a = make_ula(64, 3.5e9)
    b = make_ula(64, 3.5e9)
    assert np.array_equal(a.positions, b.positions)


def test_ula_rejects_bad_arguments():
    with pytest.raises(ScenarioError):
        make_ula(0, 3.5e9)
    with pytest.raises(ScenarioError):
        make_ula(8, 0.0)


# ---------------------------------------------------------------------------
# rectangular array


def test_ura_reference_panel_shape_and_polarisation():
    geom = make_ura(4, 32, 0.5, 3.51e9)
    assert geom.n_elements == 128
    assert geom.polarisations.count("H") == 64
    assert geom.polarisations.count("V") == 64
    # alternating along the element raster
    assert geom.polarisations[:4] == ("H", "V", "H", "V")


def test_ura_lies_in_the_vertical_plane_with_requested_pitch():
    geom = make_ura(2, 2, 0.5, 3e8)
    assert np.all(geom.positions[:, 1] == 0.0)
    gaps = np.linalg.norm(geom.positions[1] - geom.positions[0])
    assert gaps == pytest.approx(0.5 * SPEED_OF_LIGHT / 3e8)


def test_ura_single_element_and_errors():
    geom = make_ura(1, 1, 0.5, 3.5e9)
    assert geom.n_elements == 1
    with pytest.raises(ScenarioError):
        make_ura(0, 4, 0.5, 3.5e9)
    with pytest.raises(ScenarioError):
        make_ura(4, 4, -1.0, 3.5e9)


def test_geometry_rejects_duplicate_positions():
    with pytest.raises(ScenarioError, match="unique"):
        ArrayGeometry(np.zeros((2, 3)), ("V", "V"), 0.1)


# ---------------------------------------------------------------------------
# client placement


def test_ue_line_span_and_distance():
    lam = SPEED_OF_LIGHT / 3.5e9
    ue = place_ue_line(12, 2.5, 24.8, 3.5e9)
    assert ue.n_users == 12
    span = np.linalg.norm(ue.positions[-1] - ue.positions[0])
    assert span == pytest.approx(11 * 2.5 * lam, rel=1e-12)
    assert np.allclose(ue.positions[:, 1], 24.8)


def test_ue_line_nearest_client_at_close_range():
    # clients centred on boresight: the nearest one sits half a spacing
    # off axis, so its range barely exceeds the perpendicular distance
    ue = place_ue_line(12, 2.5, 3.3, 3.5e9)
    nearest = np.linalg.norm(ue.positions, axis=1).min()
    assert nearest == pytest.approx(3.3, abs=2.5e-3)
    assert nearest >= 3.3


def test_ue_line_rotation_about_its_centre():
    ue = place_ue_line(4, 2.0, 10.0, 3.5e9, rotation_deg=90.0)
    assert np.allclose(ue.positions[:, 0], 0.0, atol=1e-12)
    centre = ue.positions.mean(axis=0)
    assert np.allclose(centre, [0.0, 10.0, 0.0], atol=1e-12)


def test_ue_single_terminal_on_boresight():
    ue = place_ue_line(1, 2.5, 24.8, 3.5e9)
    assert np.allclose(ue.positions, [[0.0, 24.8, 0.0]])


def test_ue_line_rejects_bad_arguments():
    with pytest.raises(ScenarioError):
        place_ue_line(0, 2.5, 24.8, 3.5e9)
    with pytest.raises(ScenarioError):
        place_ue_line(4, 2.5, -1.0, 3.5e9)
    with pytest.raises(ScenarioError):
        place_ue_line(4, 0.0, 24.8, 3.5e9)


# ---------------------------------------------------------------------------
# scenario files


def test_scenario_round_trip(tmp_path):
    scn = default_scenario()
    path = tmp_path / "scn.yaml"
    save_scenario(scn, path)
    loaded = load_scenario(path)
    assert loaded.system == scn.system
    assert loaded.array == scn.array
    assert loaded.users == scn.users
    assert loaded.schedule == scn.schedule
    assert loaded.link == scn.link


def test_scenario_unknown_keys_rejected(tmp_path):
    path = tmp_path / "scn.yaml"
    path.write_text("system:\n  carier_freq_hz: 3.51e9\nbogus:\n  x: 1\n")
    with pytest.raises(ScenarioError) as err:
        load_scenario(path)
    message = str(err.value)
    assert "carier_freq_hz" in message
    assert "bogus" in message


def test_scenario_reports_all_violations_at_once(tmp_path):
    path = tmp_path / "scn.yaml"
    path.write_text(
        "system:\n"
        "  bandwidth_hz: -5.0\n"
        "  sampling_rate_hz: 1.0e6\n"
        "link:\n"
        "  detector: magic\n")
    with pytest.raises(ScenarioError) as err:
        load_scenario(path)
    message = str(err.value)
    assert "bandwidth" in message
    assert "sampling_rate" in message
    assert "detector" in message


def test_scenario_cross_checks_array_against_system(tmp_path):
    path = tmp_path / "scn.yaml"
    path.write_text("array:\n  n_elements: 64\n")
    with pytest.raises(ScenarioError, match="64 elements"):
        load_scenario(path)


def test_scenario_accepts_plain_exponent_floats(tmp_path):
    # YAML 1.1 would otherwise read 3.5e9 (no sign) as a string
    path = tmp_path / "scn.yaml"
    path.write_text("users:\n  distance_m: 1.2e1\n")
    scn = load_scenario(path)
    assert scn.users.distance_m == 12.0


def test_scenario_malformed_yaml_is_a_config_error(tmp_path):
    path = tmp_path / "scn.yaml"
    path.write_text("system: [unclosed\n")
    with pytest.raises(ScenarioError):
        load_scenario(path)


def test_default_scenario_builds_consistent_geometry():
    scn = default_scenario()
    geom = scn.build_geometry()
    ue = scn.build_placement()
    assert geom.n_elements == scn.system.n_bs_antennas
    assert ue.n_users == scn.system.n_users


def test_scenario_taps_parse_and_validate(tmp_path):
    path = tmp_path / "scn.yaml"
    path.write_text(
        "taps:\n"
        "  - {delay_s: 0.0, gain_re: 1.0}\n"
        "  - {delay_s: 1.0e-6, gain_re: 0.5, gain_im: -0.5}\n")
    scn = load_scenario(path)
    assert scn.taps.n_taps == 2
    assert scn.taps.gains[1] == pytest.approx(0.5 - 0.5j)
    bad = tmp_path / "bad.yaml"
    bad.write_text("taps:\n  - {delay_s: -1.0, gain_re: 1.0}\n")
    with pytest.raises(ScenarioError, match="delay"):
        load_scenario(bad)
