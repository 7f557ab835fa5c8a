import numpy as np
import pytest

from privp0.model import InfoMatrix


def dense_info(v: InfoMatrix) -> np.ndarray:
    """Materialise V as a (2n-1) x (2n-1) array (test oracle only)."""
    n = v.n
    out = np.zeros((2 * n - 1, 2 * n - 1))
    out[:n, :n] = np.diag(v.diag_out)
    out[n:, n:] = np.diag(v.diag_in)
    out[:n, n:] = v.edge_var[:, : n - 1]
    out[n:, :n] = v.edge_var[:, : n - 1].T
    return out


def brute_moments(s, q):
    w = np.array([np.exp(float(k) * s) for k in range(q)], dtype=np.float64)
    p = w / w.sum()
    k = np.arange(q)
    m = float((p * k).sum())
    return m, float((p * k**2).sum() - m**2)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


# Acceptance results, one line per criterion, printed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
