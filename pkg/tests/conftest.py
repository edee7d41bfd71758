import importlib

import numpy as np
import pytest

from curriculum_sched import _pykernels


def _compiled():
    try:
        return importlib.import_module("curriculum_sched._kernels")
    except ImportError:
        return None


COMPILED = _compiled()
BACKENDS = [pytest.param(_pykernels, id="python")]
if COMPILED is not None:
    BACKENDS.append(pytest.param(COMPILED, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        ACCEPTANCE[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
