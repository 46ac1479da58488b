from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import synthdata

settings.register_profile(
    "suite", deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("suite")

# Release-criterion verdict lines recorded by tests/test_acceptance.py;
# replayed after the run because output capture would otherwise hide them.
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def default_rig():
    return synthdata.make_rig()


@pytest.fixture
def road_scene(default_rig):
    """(rig, road mask, background image) for a standard test scene."""
    mask = synthdata.render_road_mask(default_rig)
    image = synthdata.make_background(
        np.random.default_rng(99), default_rig.image_rows, default_rig.image_cols)
    return default_rig, mask, image


@pytest.fixture(scope="session")
def wide_pool():
    """Cut-out pool spanning tiny-to-large overall sizes (~1.5 to ~60 px)."""
    sizes = synthdata.size_ladder(1.5, 60.0, 90)
    return synthdata.build_pool(np.random.default_rng(4321), sizes)
