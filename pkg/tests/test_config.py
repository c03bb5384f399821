"""Config tree, TOML round-trips, and validation."""

import pytest

from cerres import config as cfgmod
from cerres.errors import ConfigError


def test_defaults_construct():
    cfg = cfgmod.ExperimentConfig()
    assert cfg.plant.joints == 4
    assert cfg.features.M == 2500
    assert cfg.zones.K == 4
    assert cfg.authority.tau_max == 0.15
    assert cfg.learn.deadzone_theta == 0.25
    assert cfg.learn.learning_start == 200
    assert cfg.sweep.seeds == tuple(range(10))
    assert cfg.sweep.episodes == 3


def test_round_trip_is_idempotent():
    cfg = cfgmod.ExperimentConfig()
    cfg.plant.horizon = 777
    cfg.ablation.no_meta = True
    text = cfgmod.dumps(cfg)
    once = cfgmod.loads(text)
    assert cfgmod.dumps(once) == text
    assert once.plant.horizon == 777
    assert once.ablation.no_meta is True


def test_file_round_trip(tmp_path):
    cfg = cfgmod.ExperimentConfig()
    cfg.sweep.severities = (0.8, 0.6)
    path = tmp_path / "run.toml"
    cfgmod.save(cfg, path)
    back = cfgmod.load(path)
    assert back.sweep.severities == (0.8, 0.6)


def test_unknown_section_key_rejected():
    with pytest.raises(ConfigError):
        cfgmod.loads("[plant]\nwarp_factor = 9\n")


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError):
        cfgmod.loads("mystery = 1\n")


def test_parse_error_wrapped():
    with pytest.raises(ConfigError):
        cfgmod.loads("[plant\n")


def test_unsupported_schema_version_rejected():
    with pytest.raises(ConfigError):
        cfgmod.loads("schema_version = 99\n")


def test_values_coerced_to_field_types():
    cfg = cfgmod.loads("[plant]\nhorizon = 500\ndt = 0.02\namplitudes = [0.1, 0.2, 0.3, 0.4]\n")
    assert cfg.plant.horizon == 500
    assert isinstance(cfg.plant.amplitudes, tuple)
    assert cfg.plant.dt == 0.02


def test_fast_profile_reduces_features_only():
    base = cfgmod.ExperimentConfig()
    fast = cfgmod.fast_profile(base)
    assert fast.features.M == 256
    assert base.features.M == 2500  # original untouched
    assert fast.sweep.seeds == base.sweep.seeds
    assert fast.plant.horizon == base.plant.horizon


def test_copy_config_is_deep():
    a = cfgmod.ExperimentConfig()
    b = cfgmod.copy_config(a)
    b.plant.horizon = 1
    assert a.plant.horizon != 1
