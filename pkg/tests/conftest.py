import itertools

import numpy as np
import pytest


def brute_ustat(x, h):
    n = len(x)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += h(x[i], x[j])
    return total / (n * (n - 1) / 2)


@pytest.fixture
def small_corpus():
    """Integer-valued toy samples with 2 <= n <= 8."""
    rng = np.random.default_rng(1234)
    out = [np.array([0.0, 2.0]), np.array([1.0, 1.0, 1.0]), np.array([1.0, 2.0, 3.0, 4.0])]
    for n in range(2, 9):
        for _ in range(5):
            out.append(rng.integers(-5, 6, size=n).astype(float))
    return out


def all_subsets(n, B):
    return np.array(list(itertools.combinations(range(n), B)))


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _CRITERIA[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
