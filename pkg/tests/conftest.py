"""Shared fixtures: a small-feature config, one calibration per session, and
the pinned regression values."""

import json
import pathlib

import pytest

from cerres import config as cfgmod
from cerres import harness

FIXTURE_PATH = pathlib.Path(__file__).parent / "fixtures" / "regression.json"


@pytest.fixture(scope="session")
def fast_cfg():
    """Session-wide default config in the fast (M=256) profile. Do not mutate;
    use the `cfg` fixture for per-test copies."""
    return cfgmod.fast_profile(cfgmod.ExperimentConfig())


@pytest.fixture()
def cfg(fast_cfg):
    return cfgmod.copy_config(fast_cfg)


@pytest.fixture(scope="session")
def calib(fast_cfg):
    return harness.calibrate(fast_cfg)


@pytest.fixture(scope="session")
def regression():
    return json.loads(FIXTURE_PATH.read_text())
