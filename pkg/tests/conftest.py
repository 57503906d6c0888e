import numpy as np
import pytest


@pytest.fixture
def rs():
    return np.random.default_rng(20261016)


def random_complex(rs, n, m=None):
    m = n if m is None else m
    return rs.standard_normal((n, m)) + 1j * rs.standard_normal((n, m))


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
