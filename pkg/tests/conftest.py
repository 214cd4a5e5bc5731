import pytest

from delaunay_s4.cli import PRESETS
from delaunay_s4.continuation import detect_events, trace_branch
from delaunay_s4.ode import ModelParams
from delaunay_s4.shooting import ShootingPoint

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def params():
    return ModelParams(1, 1)


@pytest.fixture(scope="session")
def branch(params):
    return trace_branch(params, ShootingPoint(*PRESETS["Z1"]))


@pytest.fixture(scope="session")
def events(params, branch):
    return detect_events(params, branch)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
