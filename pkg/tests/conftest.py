import numpy as np
import pytest
from hypothesis import settings

from gradedtoda.graph import builtin_graph

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def ladder():
    return builtin_graph("ladder", (-2, 2))


@pytest.fixture
def path():
    return builtin_graph("path", (-3, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
