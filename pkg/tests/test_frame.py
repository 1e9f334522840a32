"""Pilot combs, least-squares estimation, and rate accounting."""

import numpy as np
import pytest

from mmimosim.channel import TapSet, full_grid, tapped_cfr
from mmimosim.errors import ScenarioError
from mmimosim.frame import (FrameSchedule, default_schedule,
                            estimate_from_tensor, ls_estimate, pilot_map,
                            throughput_bps, uncoded_sum_se)
from mmimosim.scenario import default_config, make_ula


# ---------------------------------------------------------------------------
# pilot allocation


def test_pilot_map_reference_combs():
    pm = pilot_map(12, 1200)
    assert pm.n_users == 12
    assert pm.assignments[0] == tuple(range(0, 1200, 12))
    assert pm.assignments[11] == tuple(range(11, 1200, 12))
    assert all(len(a) == 100 for a in pm.assignments)
    assert pm.offsets() == tuple(range(12))


def test_pilot_map_combs_are_disjoint_and_cover_the_band():
    pm = pilot_map(12, 1200)
    seen = [t for a in pm.assignments for t in a]
    assert len(seen) == len(set(seen)) == 1200
    assert set(seen) == set(range(1200))


def test_pilot_map_partial_occupancy_leaves_combs_idle():
    pm = pilot_map(4, 1200)
    seen = [t for a in pm.assignments for t in a]
    assert len(seen) == 400
    assert len(set(seen)) == 400


def test_pilot_map_rejects_too_many_users():
    with pytest.raises(ScenarioError):
        pilot_map(13, 1200)
    with pytest.raises(ScenarioError):
        pilot_map(0, 1200)
    with pytest.raises(ScenarioError):
        pilot_map(4, 6)


# ---------------------------------------------------------------------------
# least-squares estimation


def _flat_sounding(h, pm, pilots):
    """Received pilot symbol when each user transmits on its own comb
    over a frequency-flat channel h (users x antennas)."""
    n_occ = pm.n_occupied
    rx = np.zeros((n_occ, h.shape[1]), dtype=complex)
    for k, tones in enumerate(pm.assignments):
        for t in tones:
            rx[t] = h[k] * pilots[t]
    return rx


def test_ls_estimate_noiseless_flat_channel_is_exact():
    rng = np.random.default_rng(0)
    pm = pilot_map(3, 36)
    h = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    pilots = np.exp(1j * rng.uniform(0, 2 * np.pi, 36))
    rx = _flat_sounding(h, pm, pilots)
    est = ls_estimate(rx, pilots, pm, 15e3)
    assert est.values.shape == (3, 3, 4)
    for k in range(3):
        assert np.allclose(est.values[k], h[k][None, :], atol=1e-12)
    assert est.noise_var_estimate == pytest.approx(0.0, abs=1e-24)


def test_ls_estimate_recovers_frequency_selective_truth_on_the_comb():
    geom = make_ula(4, 3.5e9)
    taps = TapSet(np.array([0.0, 1.2e-6]), np.array([1.0, 0.5j]))
    tensor = tapped_cfr(taps, geom, 3, full_grid(72, 15e3))
    pm = pilot_map(3, 72)
    est = estimate_from_tensor(tensor, pm)
    for k, tones in enumerate(pm.assignments):
        truth = tensor.cfr[np.asarray(tones), :, k]
        assert np.allclose(est.values[k], truth, atol=1e-12)


def test_ls_estimate_error_variance_matches_noise_level():
    # the per-tone LS error is the channel-inverted noise; with unit
    # pilots its variance equals the injected noise variance
    rng = np.random.default_rng(42)
    pm = pilot_map(12, 1200)
    noise_var = 0.01
    h = rng.standard_normal((12, 4)) + 1j * rng.standard_normal((12, 4))
    pilots = np.ones(1200, dtype=complex)
    errors = []
    for _ in range(20):
        rx = _flat_sounding(h, pm, pilots)
        rx = rx + np.sqrt(noise_var / 2) * (
            rng.standard_normal(rx.shape) + 1j * rng.standard_normal(rx.shape))
        est = ls_estimate(rx, pilots, pm, 15e3)
        for k in range(12):
            errors.append(np.abs(est.values[k] - h[k][None, :]) ** 2)
    measured = float(np.mean(errors))
    assert measured == pytest.approx(noise_var, rel=0.05)


def test_ls_estimate_noise_variance_estimator_on_flat_channel():
    rng = np.random.default_rng(1)
    pm = pilot_map(12, 1200)
    noise_var = 0.04
    h = rng.standard_normal((12, 8)) + 1j * rng.standard_normal((12, 8))
    pilots = np.ones(1200, dtype=complex)
    rx = _flat_sounding(h, pm, pilots)
    rx = rx + np.sqrt(noise_var / 2) * (
        rng.standard_normal(rx.shape) + 1j * rng.standard_normal(rx.shape))
    est = ls_estimate(rx, pilots, pm, 15e3)
    assert est.noise_var_estimate == pytest.approx(noise_var, rel=0.10)


def test_ls_estimate_rejects_zero_pilot():
    pm = pilot_map(2, 24)
    pilots = np.ones(24, dtype=complex)
    pilots[12] = 0.0
    with pytest.raises(ScenarioError, match="zero pilot"):
        ls_estimate(np.ones((24, 2), dtype=complex), pilots, pm, 15e3)


def test_ls_estimate_validates_shapes():
    pm = pilot_map(2, 24)
    pilots = np.ones(24, dtype=complex)
    with pytest.raises(ScenarioError):
        ls_estimate(np.ones((23, 2), dtype=complex), pilots, pm, 15e3)
    with pytest.raises(ScenarioError):
        ls_estimate(np.ones((24, 2), dtype=complex), np.ones(23), pm, 15e3)


def test_estimate_from_tensor_seeded_noise_is_reproducible():
    geom = make_ula(2, 3.5e9)
    taps = TapSet(np.array([0.0]), np.array([1.0]))
    tensor = tapped_cfr(taps, geom, 2, full_grid(24, 15e3))
    pm = pilot_map(2, 24)
    a = estimate_from_tensor(tensor, pm, noise_variance=0.1, seed=3)
    b = estimate_from_tensor(tensor, pm, noise_variance=0.1, seed=3)
    c = estimate_from_tensor(tensor, pm, noise_variance=0.1, seed=4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


# ---------------------------------------------------------------------------
# frame schedule


def test_default_schedule_budget():
    sched = default_schedule()
    assert sched.symbols_per_frame == 140
    assert sched.ul_pilot_symbols_per_frame == 2
    assert sched.ul_data_symbols_per_frame == 138
    assert sched.dl_symbols_per_frame == 0


def test_schedule_rejects_overcommitted_frame():
    with pytest.raises(ScenarioError, match="140"):
        FrameSchedule(ul_data_symbols_per_frame=139)


def test_schedule_lists_all_field_problems():
    with pytest.raises(ScenarioError) as err:
        FrameSchedule(symbols_per_slot=0, ul_pilot_symbols_per_frame=-1)
    message = str(err.value)
    assert "symbols_per_slot" in message
    assert "ul_pilot_symbols_per_frame" in message


# ---------------------------------------------------------------------------
# rate accounting


def test_sum_se_reference_values():
    cfg = default_config()
    sched = default_schedule()
    assert uncoded_sum_se(12, 8.0, sched, cfg) == pytest.approx(79.488, abs=1e-9)
    assert uncoded_sum_se(22, 8.0, sched, cfg) == pytest.approx(145.728, abs=1e-9)


def test_sum_se_scales_linearly_with_users_and_bits():
    cfg = default_config()
    sched = default_schedule()
    base = uncoded_sum_se(12, 8.0, sched, cfg)
    assert uncoded_sum_se(24, 8.0, sched, cfg) == pytest.approx(2 * base)
    assert uncoded_sum_se(12, 4.0, sched, cfg) == pytest.approx(base / 2)
    assert uncoded_sum_se(0, 8.0, sched, cfg) == 0.0


def test_sum_se_counts_only_uplink_data_symbols():
    cfg = default_config()
    half = FrameSchedule(ul_pilot_symbols_per_frame=2,
                         ul_data_symbols_per_frame=69,
                         dl_symbols_per_frame=69)
    full = default_schedule()
    ratio = uncoded_sum_se(12, 8.0, half, cfg) / uncoded_sum_se(12, 8.0, full, cfg)
    assert ratio == pytest.approx(69 / 138)


def test_throughput_reference_value():
    cfg = default_config()
    se = uncoded_sum_se(12, 8.0, default_schedule(), cfg)
    assert throughput_bps(se, cfg) == pytest.approx(1.58976e9, rel=1e-12)
