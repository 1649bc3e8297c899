import numpy as np
import pytest

from boxmimo import _backend
from boxmimo.channel import draw_batch
from boxmimo.constellation import make_qam

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def python_backend():
    prev = _backend.set_backend("python")
    yield
    _backend.set_backend(prev)


@pytest.fixture(params=["compiled", "python"])
def each_backend(request):
    if request.param == "compiled" and not _backend.compiled_available():
        pytest.skip("compiled extension not built")
    prev = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(prev)


def instances(n, order, count, seed=0, snr_db=15.0):
    """``(qam, x, r, s_flat)`` tuples drawn through the channel module."""
    qam = make_qam(order)
    b = draw_batch(n, qam, snr_db, seed, 0, count)
    return [(qam, b.x[t], b.r[t], b.s_flat[t]) for t in range(count)]


def random_upper(rng, n, cond=True):
    r = np.triu(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    if cond:
        r[np.diag_indices(n)] = np.abs(r[np.diag_indices(n)]) + 1.0
    return r
