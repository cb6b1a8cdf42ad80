import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

EPS = 1e-9


def rand_density(rng, d, rank=None):
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    r = g @ g.conj().T
    return r / np.trace(r).real


def rand_kraus(rng, n, m, k=2, norm=1.0):
    ks = [rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n)) for _ in range(k)]
    tot = sum(K.conj().T @ K for K in ks)
    s = np.sqrt(norm / np.linalg.eigvalsh(tot)[-1])
    return [s * K for K in ks]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = {}


@pytest.fixture
def record_ac():
    """Store a one-line outcome for an acceptance criterion."""
    def rec(num, ok, detail):
        _ACCEPTANCE[num] = (ok, detail)
        return ok
    return rec


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[num]
        terminalreporter.write_line(f"AC{num:<2d} {'PASS' if ok else 'FAIL'}  {detail}")
