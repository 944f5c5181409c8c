import numpy as np
import pytest

from pppbayes.grid import IntensityField, make_grid

ACCEPTANCE_LINES = []


@pytest.fixture
def grid64():
    return make_grid(1, 64)


@pytest.fixture
def sine_truth(grid64):
    return IntensityField.from_function(grid64, lambda x: 2.0 + np.sin(2 * np.pi * x[:, 0]), 0.1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
