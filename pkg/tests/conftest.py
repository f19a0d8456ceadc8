"""Shared pytest wiring for the acceptance checklist.

Acceptance tests register one summary line each through the `conclude`
fixture; whatever was registered is printed as its own section at the
end of the run, so partial runs only list the criteria they exercised.
"""

from __future__ import annotations

import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def conclude():
    """Record a one-line verdict for a numbered criterion, then assert it."""

    def _conclude(number: int, ok: bool, detail: str) -> None:
        word = "PASS" if ok else "FAIL"
        _LINES[number] = f"{word}  criterion {number:2d}: {detail}"
        assert ok, f"criterion {number}: {detail}"

    return _conclude


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
