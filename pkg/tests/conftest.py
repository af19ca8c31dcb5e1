import numpy as np
import pytest

from contour_dyson.conformal import solve_maps
from contour_dyson.geometry import ContourSpec, build_contour

ZOO = {
    "circle": ContourSpec.circle(0, 1),
    "ellipse": ContourSpec.ellipse(2, 1),
    "cardioidal": ContourSpec.fourier({1: 1.0, 2: 0.1}),
    "offset_circle": ContourSpec.circle(0.3 + 0.2j, 1.0),
    "trefoil": ContourSpec.fourier({1: 1.0, -2: 0.15}),
}


@pytest.fixture(scope="session")
def contours():
    return {k: build_contour(v) for k, v in ZOO.items()}


@pytest.fixture(scope="session")
def unit_circle(contours):
    return contours["circle"]


@pytest.fixture(scope="session")
def ellipse(contours):
    return contours["ellipse"]


@pytest.fixture(scope="session")
def pairs(contours):
    return {k: solve_maps(c) for k, c in contours.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion(capsys):
    """Print and remember one pass/fail line per acceptance criterion."""

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number} ({title}): {detail}"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
