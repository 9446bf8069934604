import numpy as np
import pytest

from uavfl import model, solver
from uavfl.oracle import (
    GridSpec,
    InstanceTooLargeError,
    NoFeasiblePointError,
    config_digest,
    grid_search,
    monotone_pin,
    read_golden,
    write_golden,
)

from conftest import make_config


def tight_config(**overrides):
    base = dict(slots_per_round=1, e_max=0.05,
                initial_xy=[90.0, 50.0], final_xy=[40.0, 25.0])
    base.update(overrides)
    return make_config(**base)


class TestMonotonePin:
    def test_slack_budget_pins_uav_block_too(self):
        pins, names = monotone_pin(make_config())
        assert names == ["f_bs", "f_uav", "p_bs", "p_cm", "p_se"]
        assert np.all(pins["p_se"] == 0.0)
        assert np.all(pins["f_uav"] == 2e9)
        assert np.all(pins["p_bs"] == make_config().p_bs_max)

    def test_tight_budget_pins_bs_only(self):
        pins, names = monotone_pin(tight_config())
        assert names == ["f_bs", "p_bs"]

    def test_pinning_never_worsens_optimum(self):
        cfg = make_config()
        spec_free = GridSpec(points_per_axis=5,
                             grid_vars=("xy", "p_cm", "f_uav"))
        spec_pinned = GridSpec(points_per_axis=5)
        free_obj, _ = grid_search(cfg, spec_free)
        pinned_obj, _ = grid_search(cfg, spec_pinned)
        assert pinned_obj <= free_obj + 1e-12


class TestGridSearch:
    def test_f_only_grid_lands_on_cap(self):
        cfg = make_config()
        obj, dv = grid_search(cfg, GridSpec(points_per_axis=9,
                                            grid_vars=("f_uav",)))
        assert dv.f_uav[0, 0] == pytest.approx(cfg.f_uav_max[0], rel=1e-12)

    def test_binding_budget_respected(self):
        cfg = tight_config()
        obj, dv = grid_search(cfg, GridSpec(points_per_axis=9))
        energy = model.energy_breakdown(cfg, dv)
        assert np.all(energy.e_total
                      <= cfg.e_max * (1 + model.FEAS_TOL))
        assert model.check_feasibility(cfg, dv) == []

    def test_refinement_never_increases(self):
        cfg = make_config()
        o5, _ = grid_search(cfg, GridSpec(points_per_axis=5))
        o9, _ = grid_search(cfg, GridSpec(points_per_axis=9))
        o17, _ = grid_search(cfg, GridSpec(points_per_axis=17))
        assert o9 <= o5 + 1e-12
        assert o17 <= o9 + 1e-12

    def test_returned_point_feasible(self):
        cfg = make_config(n_uavs=2, initial_xy=[[90.0, 50.0], [-70.0, 40.0]],
                          final_xy=[[40.0, 25.0], [-30.0, 15.0]])
        obj, dv = grid_search(cfg, GridSpec(points_per_axis=9))
        assert model.check_feasibility(cfg, dv) == []
        lat, _ = model.evaluate(cfg, dv)
        assert obj == pytest.approx(lat.t_total, rel=1e-12)

    def test_instance_caps_enforced(self):
        for bad in (make_config(n_uavs=3),
                    make_config(rounds=2),
                    make_config(slots_per_round=3)):
            with pytest.raises(InstanceTooLargeError):
                grid_search(bad)

    def test_grid_size_cap_enforced(self):
        with pytest.raises(InstanceTooLargeError):
            grid_search(make_config(), GridSpec(points_per_axis=9,
                                                max_points=100))

    def test_all_points_infeasible(self):
        with pytest.raises(NoFeasiblePointError):
            grid_search(tight_config(e_max=1e-9))

    def test_solver_matches_oracle_within_resolution(self):
        cfg = make_config()
        obj, _ = grid_search(cfg, GridSpec(points_per_axis=17))
        trace = solver.run_algorithm1(cfg)
        assert abs(trace.final_objective - obj) <= 0.05 * obj


class TestGolden:
    def test_frozen_tiny_certificate(self):
        # regression against the committed certificate for the bundled
        # tiny scenario, and the solver must land within the 5% band
        from pathlib import Path

        from uavfl import cli, scenario

        golden = read_golden(Path(__file__).parent / "data" / "tiny.golden")
        cfg = scenario.load_scenario(cli.bundled_scenario_path("tiny"))
        assert config_digest(cfg) == golden["config_sha256"]
        obj, _ = grid_search(
            cfg, GridSpec(points_per_axis=golden["points_per_axis"]))
        assert obj == pytest.approx(golden["best_objective_s"], rel=1e-12)
        trace = solver.run_algorithm1(cfg)
        assert abs(trace.final_objective - obj) <= 0.05 * obj

    def test_roundtrip(self, tmp_path):
        cfg = make_config()
        spec = GridSpec(points_per_axis=9)
        obj, dv = grid_search(cfg, spec)
        path = tmp_path / "tiny.golden"
        write_golden(path, cfg, spec, obj, dv)
        got = read_golden(path)
        assert got["config_sha256"] == config_digest(cfg)
        assert got["points_per_axis"] == 9
        assert got["best_objective_s"] == obj
        for field in ("xy", "p_cm", "f_uav", "p_bs", "f_bs"):
            assert np.array_equal(getattr(got["best_point"], field),
                                  getattr(dv, field))

    def test_digest_tracks_fields(self):
        a = config_digest(make_config())
        b = config_digest(make_config(e_max=1.5))
        assert a != b
