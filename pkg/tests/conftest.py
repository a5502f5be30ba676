from __future__ import annotations

import pytest

from phi4zero.solver import SolverConfig, run


@pytest.fixture(scope="session")
def run_001():
    """Default run at lam = 0.01, n_max = 55."""
    return run(SolverConfig(lam=0.01, n_max=55))



ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
