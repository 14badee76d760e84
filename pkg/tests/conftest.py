import numpy as np
import pytest

from gphlr.cov import CovarianceParams
from gphlr.geo import generate_perturbed_grid, order_locations

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def grid100():
    locs = generate_perturbed_grid(100, 7)
    return locs, order_locations(locs)


@pytest.fixture
def params():
    return CovarianceParams(1.0, 0.2, 0.5, 0.15)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
