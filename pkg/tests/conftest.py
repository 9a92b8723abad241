import numpy as np
import pytest

from cococat import load_config

_ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record one ``CRITERION k: PASS|FAIL`` line (also printed for ``-s`` runs)."""
    def _report(number, passed, detail):
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return _report


@pytest.fixture(scope="session")
def ila_cfg():
    return load_config("paper-ila.cfg")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
