import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from lobcushion.simulator import SimParams, run_simulation  # noqa: E402


@pytest.fixture(scope="session")
def small_params():
    # one simulated hour at the default order rate
    return SimParams.default_session(N=42_130, T_ms=3_600_000, seed=7)


@pytest.fixture(scope="session")
def small_run(small_params):
    return run_simulation(small_params)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    RESULTS = getattr(module, "RESULTS", None)
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
