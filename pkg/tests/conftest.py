import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

_RESULTS = []


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def acceptance(capsys):
    """Print one PASS/FAIL line per criterion (visible even when output is captured)."""

    def report(number, title, ok, detail):
        line = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _RESULTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
