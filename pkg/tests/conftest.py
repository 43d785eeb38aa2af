import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# degree sequences small enough (<= 12 half-edges) for exhaustive enumeration
TINY_CORPUS = [
    [0],
    [1, 1],
    [0, 0, 0],
    [2, 2, 2],
    [2, 2, 2, 2],
    [3, 3, 3, 3],
    [0, 1, 1, 2],
    [1, 2, 3],
    [1, 1, 2, 2],
    [2, 2, 2, 2, 2, 2],
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
