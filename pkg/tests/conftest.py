import numpy as np
import pytest

# (criterion, title, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE_ROWS: list = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    def _record(k: int, title: str, passed: bool, detail: str) -> None:
        line = f"ACCEPTANCE {k:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        print(line)
        ACCEPTANCE_ROWS.append((k, line))
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_ROWS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_ROWS):
        terminalreporter.write_line(line)
