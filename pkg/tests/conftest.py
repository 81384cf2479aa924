import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wise.config import default_profile  # noqa: E402
from wise.scoring import ResourceReading  # noqa: E402

ON_TARGET = {"cpu/avg": 40.0, "cpu/p95": 70.0, "ram/avg": 50.0, "ram/p95": 70.0, "net/avg": 30.0}


@pytest.fixture(scope="session")
def table1():
    return default_profile()


@pytest.fixture(scope="session")
def table1_specs(table1):
    return table1.global_specs


def readings(values):
    return [ResourceReading(k, float(v)) for k, v in values.items()]


def spec_dicts(specs):
    return [s.to_dict() for s in specs]


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """Collect one PASS/FAIL line per acceptance criterion."""
    results = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def _record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        results.append(line)

    return _record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
