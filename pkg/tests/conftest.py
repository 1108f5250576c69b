import numpy as np
import pytest

from gplag.data import from_series


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_pair():
    t = np.arange(6, dtype=float)
    return from_series([t, t + 0.5], [np.sin(t), np.cos(t)])


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Record one line per acceptance criterion; printed in the terminal summary."""
    def record(number, title, passed, detail):
        _ACCEPTANCE.append((number, title, passed, detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] #{number} {title}: {detail}")
