import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_OUTCOMES = []
_DETAILS = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _OUTCOMES.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _OUTCOMES:
        status = "PASS" if outcome == "passed" else "FAIL"
        detail = _DETAILS.get(name, "")
        terminalreporter.write_line(f"{status}  {name}" + (f": {detail}" if detail else ""))


@pytest.fixture
def report(request):
    """Attach a one-line summary to the running acceptance test."""

    def note(text):
        _DETAILS[request.node.name] = text
        print(text)

    return note


@pytest.fixture
def rng():
    from langevin_phi.rng import RngStream

    return RngStream(12345)
