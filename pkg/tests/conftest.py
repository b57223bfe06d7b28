import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from objkorn import catalog  # noqa: E402

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def entries():
    return {name: catalog.load(name) for name in catalog.list_entries()}


@pytest.fixture(scope="session")
def chain(entries):
    return entries["chain"]


@pytest.fixture(scope="session")
def zigzag(entries):
    return entries["zigzag"]


@pytest.fixture(scope="session")
def helix(entries):
    return entries["helix"]


@pytest.fixture(scope="session")
def square(entries):
    return entries["square-lattice"]


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number, passed, detail):
        line = f"ACCEPTANCE {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
