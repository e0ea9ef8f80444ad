import numpy as np
import pytest

from slabdtn.grid import ExtensionField, build_grid
from slabdtn.layer import compute_layer, transplant
from slabdtn.nonlinearity import allen_cahn
from slabdtn.solver import minimize


@pytest.fixture(scope="session")
def ac():
    return allen_cahn()


@pytest.fixture(scope="session")
def layer_a0(ac):
    """1-D Allen-Cahn layer at a = 0 on [-20, 20]."""
    return compute_layer(ac, 0.0, 20.0, 161, 16)


@pytest.fixture(scope="session")
def minimizer_2d(ac):
    """Small n = 2, a = 0 minimiser with tanh(x2 / 2) data."""
    grid = build_grid(2, 16.0, 65, 8, None, 0.0)
    start = ExtensionField.from_trace_profile(grid, lambda x1, x2: np.tanh(x2 / 2.0))
    rep = minimize(grid, ac, start, start)
    assert rep.converged
    return rep.field


@pytest.fixture(scope="session")
def oblique_2d(ac):
    """n = 2, a = 0 solve with the 1-D layer laid along (cos pi/6, sin pi/6)."""
    theta = np.pi / 6
    grid = build_grid(2, 16.0, 65, 8, None, 0.0)
    h = grid.h
    L1 = np.ceil(16.0 * np.sqrt(2.0) / h) * h
    prof = compute_layer(ac, 0.0, L1, int(round(2 * L1 / h)) + 1, 8)
    data = transplant(prof.field, grid, [np.cos(theta), np.sin(theta)])
    rep = minimize(grid, ac, data, data)
    assert rep.converged
    return rep.field


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
