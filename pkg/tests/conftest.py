import numpy as np
import pytest

from clarkmodel.measures import CircleMeasure

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record and print the outcome of an acceptance criterion."""
    def record(number: int, passed: bool, detail: str = "") -> bool:
        passed = bool(passed)
        _CRITERIA[number] = (passed, detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}".rstrip())
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())


@pytest.fixture
def single_atom():
    """The point mass at -1 with unit weight."""
    return CircleMeasure(np.array([-1.0 + 0j]), np.array([1.0]))


@pytest.fixture
def two_atoms():
    return CircleMeasure.from_angles([0.5, -0.5], [0.7, 0.4])
