import sys

import numpy as np
import pytest

from limbsafe.scenario import default_scenario


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def human(scenario):
    return scenario.human


@pytest.fixture(scope="session")
def robot(scenario):
    return scenario.robot


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_thetas(model, rng, n):
    lo, hi = model.joint_limits.T
    return rng.uniform(lo, hi, size=(n, 5))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
