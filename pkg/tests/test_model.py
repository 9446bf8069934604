import json
import math

import numpy as np
import pytest

from uavfl.model import (
    DecisionVector,
    InfeasibleRateError,
    aggregation_time,
    check_feasibility,
    distance_to_bs,
    downlink_rate,
    download_time,
    energy_breakdown,
    evaluate,
    sensing_energy,
    sensing_time,
    training_energy,
    training_time,
    uplink_rate,
    upload_energy,
    upload_time,
)

from conftest import hover_dv, make_config

GAMMA0 = 1e-5 / 1e-11   # reference SNR used in the numeric cases below


class TestRates:
    def test_distance_directly_above(self):
        assert distance_to_bs(0, 0, 100) == 100.0

    def test_distance_345_triangle(self):
        assert distance_to_bs(300, 400, 1e-4) == pytest.approx(500.0, rel=1e-8)

    def test_distance_general(self):
        expected = math.sqrt(120**2 + 50**2 + 100**2)
        assert distance_to_bs(120, 50, 100) == pytest.approx(expected, rel=1e-15)

    def test_distance_at_least_altitude(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(scale=500, size=(2, 100))
        assert np.all(distance_to_bs(x, y, 80.0) >= 80.0)

    def test_uplink_zero_power(self):
        assert uplink_rate(0.0, 200.0, 20e6, GAMMA0) == 0.0

    def test_uplink_decreases_with_distance(self):
        near = uplink_rate(0.2, 150.0, 20e6, GAMMA0)
        far = uplink_rate(0.2, 300.0, 20e6, GAMMA0)
        assert far < near

    def test_uplink_concrete(self):
        # independent scalar path: bw * log2(1 + g0*p/d^2)
        expected = 20e6 * math.log2(1.0 + GAMMA0 * 0.1 / 200.0**2)
        assert uplink_rate(0.1, 200.0, 20e6, GAMMA0) == pytest.approx(
            expected, rel=1e-15)

    def test_uplink_rejects_zero_distance(self):
        with pytest.raises(ValueError):
            uplink_rate(0.1, 0.0, 20e6, GAMMA0)

    def test_downlink_zero_power(self):
        assert downlink_rate(0.0, 150.0, 20e6, GAMMA0) == 0.0

    def test_downlink_matches_uplink_reciprocal(self):
        assert downlink_rate(0.25, 180.0, 20e6, GAMMA0) == uplink_rate(
            0.25, 180.0, 20e6, GAMMA0)

    def test_downlink_concrete(self):
        expected = 20e6 * math.log2(1.0 + GAMMA0 * 1.0 / 150.0**2)
        assert downlink_rate(1.0, 150.0, 20e6, GAMMA0) == pytest.approx(
            expected, rel=1e-15)

    def test_rates_match_log2_on_random_draws(self):
        rng = np.random.default_rng(42)
        p = rng.uniform(1e-4, 5.0, 10_000)
        d = rng.uniform(10.0, 2000.0, 10_000)
        bw = rng.uniform(1e6, 50e6, 10_000)
        g0 = rng.uniform(1e4, 1e8, 10_000)
        got = uplink_rate(p, d, bw, g0)
        ref = bw * np.log2(1.0 + g0 * p / d**2)
        assert np.max(np.abs(got - ref) / ref) <= 1e-12


class TestSensingAndTraining:
    def test_sensing_time_zero_unit(self):
        assert sensing_time(0.0, 12345) == 0.0

    def test_sensing_time_product(self):
        assert sensing_time(1e-3, 1000) == pytest.approx(1.0, rel=1e-15)

    def test_sensing_time_zero_samples(self):
        assert sensing_time(5e-4, 0) == 0.0

    def test_sensing_energy_zero_power(self):
        assert sensing_energy(0.0, 3.7) == 0.0

    def test_sensing_energy_product(self):
        assert sensing_energy(0.5, 2.0) == pytest.approx(1.0, rel=1e-15)

    def test_sensing_energy_composes(self):
        # p * (t_u * d) == p * t_u * d
        assert sensing_energy(0.3, sensing_time(2e-4, 800)) == pytest.approx(
            0.3 * 2e-4 * 800, rel=1e-15)

    def test_training_time_concrete(self):
        assert training_time(15, 1e3, 1e3, 2e9) == pytest.approx(
            7.5e-3, rel=1e-12)

    def test_training_time_halves_with_double_f(self):
        t1 = training_time(15, 1e3, 1e3, 1e9)
        t2 = training_time(15, 1e3, 1e3, 2e9)
        assert t2 == pytest.approx(t1 / 2, rel=1e-12)

    def test_training_time_zero_samples(self):
        assert training_time(15, 1e3, 0, 2e9) == 0.0

    def test_training_time_rejects_zero_f(self):
        with pytest.raises(ValueError):
            training_time(15, 1e3, 1e3, 0.0)

    def test_training_energy_zero_f(self):
        assert training_energy(15, 1e-28, 1e3, 1e3, 0.0) == 0.0

    def test_training_energy_concrete(self):
        expected = 15 * 1e-28 * 1e3 * 1e3 * (2e9) ** 2
        assert training_energy(15, 1e-28, 1e3, 1e3, 2e9) == pytest.approx(
            expected, rel=1e-12)
        assert expected == pytest.approx(6.0e-3, rel=1e-12)

    def test_training_energy_quadratic(self):
        e1 = training_energy(15, 1e-28, 1e3, 1e3, 1e9)
        e2 = training_energy(15, 1e-28, 1e3, 1e3, 2e9)
        assert e2 == pytest.approx(4 * e1, rel=1e-12)


class TestUploadDownload:
    def test_upload_constant_rate_closed_form(self):
        s_l, big_t, rate = 5e6, 8, 12e6
        got = upload_time(s_l / big_t, np.full(big_t, rate))
        assert got == pytest.approx(s_l / rate, rel=1e-12)

    def test_upload_single_slot(self):
        assert upload_time(5e6, [10e6]) == pytest.approx(0.5, rel=1e-15)

    def test_upload_heterogeneous_rates(self):
        rates = [4e6, 8e6, 16e6]
        payload = 1e6
        expected = sum(payload / r for r in rates)
        assert upload_time(payload, rates) == pytest.approx(expected, rel=1e-14)

    def test_upload_zero_rate_rejected(self):
        with pytest.raises(InfeasibleRateError):
            upload_time(1e6, [5e6, 0.0])

    def test_upload_zero_payload(self):
        assert upload_time(0.0, [0.0, 0.0]) == 0.0

    def test_upload_energy_zero_power(self):
        assert upload_energy(1e6, [5e6, 5e6], [0.0, 0.0]) == 0.0

    def test_upload_energy_single_slot(self):
        assert upload_energy(5e6, [10e6], [0.2]) == pytest.approx(
            0.2 * 5e6 / 10e6, rel=1e-15)

    def test_upload_energy_mixed_slots(self):
        rates = [4e6, 8e6, 16e6]
        powers = [0.1, 0.0, 0.3]
        payload = 1e6
        expected = 0.1 * payload / 4e6 + 0.3 * payload / 16e6
        assert upload_energy(payload, rates, powers) == pytest.approx(
            expected, rel=1e-14)

    def test_aggregation_concrete(self):
        assert aggregation_time(1e4, 5, 1e10) == pytest.approx(5e-6, rel=1e-15)

    def test_aggregation_vanishes_at_high_f(self):
        assert aggregation_time(1e4, 5, 1e18) < 1e-13

    def test_aggregation_zero_units(self):
        assert aggregation_time(1e4, 0, 1e10) == 0.0

    def test_download_unit(self):
        assert download_time(7e6, 7e6) == pytest.approx(1.0, rel=1e-15)

    def test_download_decreases_with_power(self):
        d, bw = 150.0, 20e6
        t1 = download_time(5e6, downlink_rate(1.0, d, bw, GAMMA0))
        t2 = download_time(5e6, downlink_rate(2.0, d, bw, GAMMA0))
        assert t2 < t1

    def test_download_concrete(self):
        rate = 20e6 * math.log2(1.0 + GAMMA0 * 1.0 / 150.0**2)
        assert download_time(5e6, downlink_rate(1.0, 150.0, 20e6, GAMMA0)) \
            == pytest.approx(5e6 / rate, rel=1e-14)

    def test_download_zero_rate_rejected(self):
        with pytest.raises(InfeasibleRateError):
            download_time(1e6, 0.0)


class TestEvaluate:
    def test_single_uav_hand_sum(self):
        cfg = make_config(n_uavs=1, rounds=1, slots_per_round=2)
        dv = hover_dv(cfg, p_cm=0.2, f_uav=1e9, p_bs=1.0, f_bs=5e9)
        lat, en = evaluate(cfg, dv)
        d = math.sqrt(120**2 + 60**2 + 100**2)
        rate_up = 20e6 * math.log2(1 + cfg.gamma0 * 0.2 / d**2)
        rate_dl = 20e6 * math.log2(1 + cfg.gamma0 * 1.0 / d**2)
        expected = (2e-4 * 1000                  # sense
                    + 15 * 2e4 * 1000 / 1e9      # train
                    + 2 * (5e6 / 2) / rate_up    # upload, two equal slots
                    + 2e8 * 1.0 / 5e9            # aggregate
                    + 5e6 / rate_dl)             # download
        assert lat.t_total == pytest.approx(expected, rel=1e-12)
        e_expected = (0.0 + 15 * 1e-28 * 2e4 * 1000 * (1e9) ** 2
                      + 0.2 * 5e6 / rate_up)
        assert en.e_total[0] == pytest.approx(e_expected, rel=1e-12)

    def test_identical_uavs_symmetric_max(self):
        cfg = make_config(n_uavs=3, initial_xy=[100.0, 80.0],
                          final_xy=[20.0, 10.0], agg_samples=3.0)
        dv = hover_dv(cfg)
        lat, _ = evaluate(cfg, dv)
        per_uav = (lat.t_sense + lat.t_train + lat.t_upload + lat.t_agg
                   + lat.t_download)
        assert np.allclose(lat.t_round, per_uav[0], rtol=1e-13)

    def test_k_identical_rounds(self):
        cfg = make_config(rounds=3)
        dv = hover_dv(cfg)
        lat, _ = evaluate(cfg, dv)
        assert np.ptp(lat.t_round) <= 1e-13 * lat.t_round[0]
        assert lat.t_total == pytest.approx(3 * lat.t_round[0], rel=1e-12)

    def test_round_max_semantics(self):
        cfg = make_config(n_uavs=2, rounds=2, slots_per_round=3)
        rng = np.random.default_rng(3)
        dv = hover_dv(cfg)
        dv = dv.replace(f_uav=rng.uniform(0.2, 1.0, (2, 2)) * 2e9,
                        p_cm=rng.uniform(0.05, 0.3, (2, 2, 3)))
        lat, _ = evaluate(cfg, dv)
        per_uav = (lat.t_sense + lat.t_train + lat.t_upload + lat.t_agg
                   + lat.t_download)
        for k in range(2):
            assert np.all(lat.t_round[k] >= per_uav[:, k] - 1e-12)
            assert np.any(np.isclose(lat.t_round[k], per_uav[:, k],
                                     rtol=1e-13))

    def test_monotone_in_f_and_p(self):
        cfg = make_config(n_uavs=2, rounds=2, slots_per_round=2)
        dv = hover_dv(cfg)
        lat0, _ = evaluate(cfg, dv)
        lat1, _ = evaluate(cfg, dv.replace(
            f_uav=dv.f_uav * np.array([[1.5, 1.0], [1.0, 1.0]])))
        assert np.all(lat1.t_train <= lat0.t_train + 1e-15)
        p_up = dv.p_cm.copy()
        p_up[0, 0, 1] *= 1.8
        lat2, _ = evaluate(cfg, dv.replace(p_cm=p_up))
        assert np.all(lat2.t_upload <= lat0.t_upload + 1e-15)

    def test_zero_rate_propagates(self):
        cfg = make_config()
        dv = hover_dv(cfg, p_cm=0.0)
        with pytest.raises(InfeasibleRateError):
            evaluate(cfg, dv)


class TestFeasibility:
    def test_all_zero_powers_only_energy_can_fail(self):
        # boxes hold at zero; static trajectory holds; with a roomy budget
        # nothing is violated even though rates are zero
        cfg = make_config(e_max=5.0)
        dv = hover_dv(cfg, p_se=0.0, p_cm=0.0, f_uav=1e9, p_bs=0.0, f_bs=5e9)
        assert check_feasibility(cfg, dv) == []
        # shrink the budget below the training energy: exactly that fails
        e_train = 15 * 1e-28 * 2e4 * 1000 * (1e9) ** 2
        cfg2 = make_config(e_max=e_train / 2)
        bad = check_feasibility(cfg2, dv)
        assert {v.constraint for v in bad} == {"energy_budget"}

    def test_displacement_boundary_inclusive(self):
        cfg = make_config(slots_per_round=2)
        step = cfg.v_max * cfg.slot_len
        xy = np.zeros((1, 1, 2, 2))
        xy[0, 0, 0] = cfg.initial_xy[0] + [step, 0.0]
        xy[0, 0, 1] = xy[0, 0, 0] + [step, 0.0]
        dv = hover_dv(cfg).replace(xy=xy)
        assert check_feasibility(cfg, dv) == []
        xy2 = xy.copy()
        xy2[0, 0, 1, 0] += 0.01 * step
        assert any(v.constraint == "displacement"
                   for v in check_feasibility(cfg, dv.replace(xy=xy2)))

    def test_crafted_over_budget_single_violation(self):
        cfg = make_config()
        dv = hover_dv(cfg, p_cm=0.25, f_uav=1.5e9)
        energy = energy_breakdown(cfg, dv)
        cfg_tight = make_config(e_max=float(energy.e_total[0]) * 0.9)
        bad = check_feasibility(cfg_tight, dv)
        assert len(bad) == 1
        assert bad[0].constraint == "energy_budget"
        assert bad[0].index == (0,)

    def test_box_violations_reported(self):
        cfg = make_config()
        dv = hover_dv(cfg, p_cm=cfg.p_cm_max[0] * 1.01)
        assert any(v.constraint == "p_cm_max"
                   for v in check_feasibility(cfg, dv))

    def test_roundtrip_serialization_keeps_feasibility(self):
        cfg = make_config(n_uavs=2, rounds=2, slots_per_round=3)
        dv = hover_dv(cfg)
        assert check_feasibility(cfg, dv) == []
        blob = json.dumps(dv.to_dict())
        dv2 = DecisionVector.from_dict(json.loads(blob))
        assert check_feasibility(cfg, dv2) == []
        for name in ("xy", "p_se", "p_cm", "f_uav", "p_bs", "f_bs"):
            assert np.array_equal(getattr(dv, name), getattr(dv2, name))


class TestConfigInvariants:
    def test_flight_budget_identity(self):
        cfg = make_config(slots_per_round=5, slot_len=1.5)
        assert cfg.t_flight == pytest.approx(7.5, rel=1e-15)

    def test_gamma0_derived(self):
        cfg = make_config(beta0=2e-5, noise_power=4e-12)
        assert cfg.gamma0 == pytest.approx(5e6, rel=1e-15)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            make_config(bw_bs=0.0)
        with pytest.raises(ValueError):
            make_config(p_cm_max=-1.0)

    def test_immutables(self):
        cfg = make_config()
        with pytest.raises(ValueError):
            cfg.samples[0, 0] = 5.0
