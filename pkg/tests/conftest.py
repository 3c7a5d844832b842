from __future__ import annotations

from typing import List, Tuple

import pytest

_ACCEPTANCE: List[Tuple[str, bool, str]] = []


class AcceptanceRecorder:
    """Collects one PASS/FAIL line per acceptance criterion.

    The line is printed immediately (visible with ``-s``) and again in the
    terminal summary, so it always ends up in the test log.
    """

    def __call__(self, criterion: str, ok: bool, detail: str) -> bool:
        line = (criterion, bool(ok), detail)
        _ACCEPTANCE.append(line)
        print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return bool(ok)


@pytest.fixture(scope="session")
def record() -> AcceptanceRecorder:
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
