import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from freqcover.coeffexpr import CoeffSet
from freqcover.grid import build_grid, build_inner_mask
from freqcover.search import FieldSource

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit_coeffs_2d():
    return CoeffSet.from_strings("1", dim=2)


@pytest.fixture(scope="session")
def small_source_2d(unit_coeffs_2d):
    """2-D unit square, n = 24, default boundary conditions (1, x, y)."""
    grid = build_grid(2, (0, 1), 24)
    mask = build_inner_mask(grid, 0.1)
    return FieldSource(grid, unit_coeffs_2d, ["1", "x", "y"], mask)


@pytest.fixture(scope="session")
def field_pool_2d(small_source_2d):
    """Constraint fields for a spread of frequencies away from the spectrum."""
    omegas = [0.5, 2.0, 3.0, 5.0, 5.5, 6.0, 6.5, 7.5, 8.0, 8.5, 9.5, 10.5]
    return [small_source_2d.field(w)[0] for w in omegas]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
