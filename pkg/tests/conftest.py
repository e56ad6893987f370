import time

import pytest

from scadci.optimizer import OptimizationProblem, optimize
from scadci.stats_core import ProblemConfig

_ACCEPTANCE_LINES = []


class CellCache:
    """Optimized s* per (m, eta, q), computed once per session with wall time."""

    def __init__(self):
        self._cells = {}

    def get(self, m, eta, q):
        key = (m, eta, q)
        if key not in self._cells:
            start = time.perf_counter()
            try:
                result = optimize(OptimizationProblem(ProblemConfig(m=m, eta=eta), q=q))
                error = None
            except Exception as exc:  # reported per cell, table still produced
                result, error = None, exc
            self._cells[key] = (result, error, time.perf_counter() - start)
        return self._cells[key]


@pytest.fixture(scope="session")
def cells():
    return CellCache()


@pytest.fixture
def report():
    def _report(criterion, passed, detail=""):
        line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
