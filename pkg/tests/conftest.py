"""Collects one result line per acceptance criterion and prints them at the end."""

import pytest

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def criterion():
    def record(number: int, title: str, ok: bool, detail: str = ""):
        ACCEPTANCE_LINES[number] = f"[{'PASS' if ok else 'FAIL'}] #{number:<2} {title}" + (f": {detail}" if detail else "")
        print(ACCEPTANCE_LINES[number])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
