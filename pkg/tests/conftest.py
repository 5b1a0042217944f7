import numpy as np
import pytest

from vspectra.bvp import BoundaryConditions, normalize_bc
from vspectra.quadrature import make_grid
from vspectra.reduction import build_raw

ACCEPTANCE_LINES: list[str] = []


def jackson_form(points=401):
    return build_raw(make_grid(points), 1, 2, "0")


def jackson_bc():
    return normalize_bc(BoundaryConditions(np.array([[1, 0, 0], [0, 1, 0], [1, 0, 0]]), 2))


@pytest.fixture(scope="session")
def jackson():
    return jackson_form(), jackson_bc()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
