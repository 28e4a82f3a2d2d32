import numpy as np
import pytest

_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def report(name, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({elapsed:.2f} s, budget {budget:g} s)"
        _LINES.append(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
