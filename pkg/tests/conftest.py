import numpy as np
import pytest

from dsula import model


@pytest.fixture
def one_point():
    """N=1, x=(1), y=1."""
    return model.RegressionData(np.array([[1.0]]), np.array([1.0]))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
