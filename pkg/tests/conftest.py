from __future__ import annotations

import numpy as np
import pytest

from idc.kernels import get_backend


def _backends():
    names = ["python"]
    try:
        get_backend("compiled")
        names.append("compiled")
    except ImportError:
        pass
    return names


BACKENDS = _backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return get_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_spd(rng, n, cond_shift=1.0):
    a = rng.normal(size=(n, n))
    return a @ a.T + cond_shift * np.eye(n)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k)):
        terminalreporter.write_line(ACCEPTANCE[key])
