import numpy as np
import pytest

from csforms.geometry import hopf_chart


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def sphere_points(rng):
    return hopf_chart().sample(rng, 40)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
