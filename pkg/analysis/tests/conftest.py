"""Acceptance-line reporter for the analysis test suite."""

from __future__ import annotations

import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one [ACCEPTANCE] verdict line; asserts on FAIL."""

    def _record(criterion: int, passed: bool, detail: str = "") -> None:
        verdict = "PASS" if passed else "FAIL"
        line = f"[ACCEPTANCE] C{criterion} {verdict}"
        if detail:
            line += f" ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
