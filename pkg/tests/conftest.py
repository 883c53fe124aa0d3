import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gjm.povm import qubit_assembly, xz_directions

settings.register_profile("gjm", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("gjm")

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])


@pytest.fixture
def zx():
    return qubit_assembly([Z, X])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pair(theta):
    return xz_directions([0.0, theta])


def cone3(theta):
    return xz_directions([0.0, theta, -theta])


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record_acceptance(key: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[key] = (ok, detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'} {detail}")


def _criterion_order(key):
    head = key.split()[0]
    return (int(head) if head.isdigit() else 99, key)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=_criterion_order):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
