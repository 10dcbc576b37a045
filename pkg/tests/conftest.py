import numpy as np
import pytest

from qtdoa.core import reference_anchors, reference_scenario

REPORT_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def anchors():
    return reference_anchors()


@pytest.fixture(scope="session")
def scenario():
    return reference_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report(capsys, request):
    """Print one PASS/FAIL line for an acceptance criterion and keep it for the final summary."""
    def emit(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}"
        with capsys.disabled():
            print("\n" + line)
        request.config.stash.setdefault(REPORT_KEY, []).append(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(REPORT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
