import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fesmps.isolve import sweep_bond_dimensions  # noqa: E402
from fesmps.models import ising  # noqa: E402


@pytest.fixture(scope="session")
def critical_sweep():
    """Warm-started critical Ising states at D = 8, 12, 16."""
    res = sweep_bond_dimensions(ising(1.0, 1.0), [8, 12, 16], tol=1e-9)
    return {rep.D: (state, rep) for state, rep in res}


@pytest.fixture(scope="session")
def critical_d8(critical_sweep):
    return critical_sweep[8][0]


@pytest.fixture(scope="session")
def critical_d16(critical_sweep):
    return critical_sweep[16][0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion, then assert it."""

    def check(number, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}: {detail}"
        request.config.acceptance_lines.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
