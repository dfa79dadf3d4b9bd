"""Shared pytest hooks: one PASS/FAIL summary line per acceptance criterion.

Acceptance tests are named ``test_criterion_<N>_...``; after the run a
terminal section lists each criterion that executed with its outcome and
an optional detail string recorded by the test via the ``criterion_note``
fixture.
"""

import re

import pytest

_CRITERION_ID = re.compile(r"test_criterion_(\d+)")
_outcomes: dict[int, str] = {}
_details: dict[int, str] = {}


@pytest.fixture
def criterion_note():
    """Setter the acceptance tests use to annotate their summary line."""

    def _set(number: int, text: str) -> None:
        _details[number] = text

    return _set


def pytest_runtest_logreport(report):
    match = _CRITERION_ID.search(report.nodeid)
    if match is None:
        return
    number = int(match.group(1))
    if report.when == "call":
        if report.passed:
            _outcomes[number] = "PASS"
        elif report.skipped:
            _outcomes[number] = "SKIP"
        else:
            _outcomes[number] = "FAIL"
    elif report.failed:
        # setup or teardown crash counts as a failed criterion
        _outcomes[number] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        line = f"criterion {number}: {_outcomes[number]}"
        if number in _details:
            line = f"{line} ({_details[number]})"
        terminalreporter.write_line(line)
