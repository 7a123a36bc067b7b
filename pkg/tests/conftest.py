import numpy as np
import pytest

_CRITERIA = {}
_N_CRITERIA = 12


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, passed, detail)."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)

    return record


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, _N_CRITERIA + 1):
        passed, detail = _CRITERIA.get(number, (False, "not recorded (test errored or was deselected)"))
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
