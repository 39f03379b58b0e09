import numpy as np
import pytest

from qvigame import GridRequest, Priority, build_grid, extract_policy, solve_backward
from qvigame.reference import reference_grid, reference_problem


@pytest.fixture(scope="session")
def ref_spec():
    return reference_problem()


@pytest.fixture(scope="session")
def ref_grid(ref_spec):
    return reference_grid(ref_spec)


@pytest.fixture(scope="session")
def ref_solution(ref_spec, ref_grid):
    return solve_backward(ref_spec, ref_grid)


@pytest.fixture(scope="session")
def ref_policy(ref_spec, ref_solution):
    return extract_policy(ref_solution, ref_spec)


@pytest.fixture(scope="session")
def coarse_grid(ref_spec):
    """101-node grid on the reference domain; fast enough for property tests."""
    return build_grid(ref_spec, GridRequest(((-2.0, 2.0),), (101,)))


@pytest.fixture(scope="session")
def coarse_solution(ref_spec, coarse_grid):
    return solve_backward(ref_spec, coarse_grid)


@pytest.fixture(scope="session")
def coarse_policy(ref_spec, coarse_solution):
    return extract_policy(coarse_solution, ref_spec)


def hat(x, height=1.0):
    return height * np.maximum(0.0, 1.0 - np.abs(x))


CRITERIA: list[str] = []


@pytest.fixture
def report_criterion(capsys):
    """Print and remember one PASS/FAIL line; returns the pass flag for asserting."""

    def emit(label: str, passed: bool, detail: str) -> bool:
        line = f"{label}: {'PASS' if passed else 'FAIL'}  {detail}"
        CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
