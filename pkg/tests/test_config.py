import dataclasses

import pytest

from planarquad.config import (DisturbanceScript, EvalProtocol,
                               ExperimentConfig, TrajectoryDefaults,
                               config_from_dict, config_to_dict, load_config,
                               save_config)


def test_eval_protocol_defaults():
    ev = EvalProtocol()
    assert ev.eval_interval == 5000
    assert ev.eval_episodes == 10
    assert ev.noise_free


class TestDisturbanceScript:
    def test_velocity_schedule(self):
        s = DisturbanceScript()
        assert s.v_d_at(0.0) == 2.0
        assert s.v_d_at(3.99) == 2.0
        assert s.v_d_at(4.0) == 4.0
        assert s.v_d_at(7.99) == 4.0
        assert s.v_d_at(8.0) == 3.0
        assert s.v_d_at(19.9) == 3.0

    def test_force_windows(self):
        s = DisturbanceScript()
        assert s.force_at(11.9) == 0.0
        assert s.force_at(12.0) == 10.0
        assert s.force_at(12.49) == 10.0
        assert s.force_at(12.5) == 0.0
        assert s.force_at(16.2) == -10.0
        assert s.force_at(16.6) == 0.0

    def test_total_time(self):
        assert DisturbanceScript().total_time == 20.0

    def test_rejects_unsorted_schedule(self):
        with pytest.raises(ValueError):
            DisturbanceScript(velocity_schedule=((4.0, 2.0), (0.0, 4.0)))
        with pytest.raises(ValueError):
            DisturbanceScript(velocity_schedule=((0.0, 2.0), (0.0, 4.0)))


def test_trajectory_defaults_build():
    td = TrajectoryDefaults()
    params = td.build()
    assert params.T_st == td.T_st
    assert params.l_span == td.l_span
    assert params.P_0[1] == td.p0_y
    assert params.bezier_points.shape == (12, 2)


class TestRoundTrip:
    def test_default_config_round_trip(self, tmp_path):
        cfg = ExperimentConfig()
        path = tmp_path / "cfg.yaml"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_modified_values_survive(self, tmp_path):
        cfg = ExperimentConfig(
            robot=dataclasses.replace(ExperimentConfig().robot,
                                      total_mass=20.0),
            trainer=dataclasses.replace(ExperimentConfig().trainer,
                                        batch_size=64),
            periodicity_threshold=0.5)
        path = tmp_path / "cfg.yaml"
        save_config(cfg, path)
        loaded = load_config(path)
        assert loaded.robot.total_mass == 20.0
        assert loaded.trainer.batch_size == 64
        assert loaded.periodicity_threshold == 0.5
        assert loaded == cfg

    def test_dict_round_trip_is_plain_data(self):
        d = config_to_dict(ExperimentConfig())
        assert isinstance(d["robot"]["hip_range"], list)
        assert config_from_dict(d) == ExperimentConfig()

    def test_partial_dict_uses_defaults(self):
        cfg = config_from_dict({"trainer": {"batch_size": 10}})
        assert cfg.trainer.batch_size == 10
        assert cfg.trainer.learning_rate == 1e-3
        assert cfg.robot == ExperimentConfig().robot

    def test_none_path_gives_defaults(self):
        assert load_config(None) == ExperimentConfig()

    def test_unknown_section_rejected(self):
        with pytest.raises(ValueError):
            config_from_dict({"rocket": {}})

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            config_from_dict({"trainer": {"warp_speed": 9}})
