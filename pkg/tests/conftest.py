import numpy as np
import pytest

from evofam.gelfand import GelfandTriple


def random_hpd(rng, n, shift=0.5, complex_=True):
    X = rng.standard_normal((n, n))
    if complex_:
        X = X + 1j * rng.standard_normal((n, n))
    return X @ X.conj().T / n + shift * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triple6(rng):
    return GelfandTriple(random_hpd(rng, 6), random_hpd(rng, 6, shift=2.0))


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
