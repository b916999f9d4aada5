import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collect one summary line per acceptance criterion."""

    def record(number, passed, detail):
        ACCEPTANCE_LINES.append((number, passed, detail))
        return passed

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}")
