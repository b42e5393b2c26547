"""Shared fixtures and the acceptance summary printed at the end of a run."""

import pytest

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(key, ok: bool, detail: str) -> bool:
    line = f"ACCEPTANCE {key}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def record_note(key, detail: str) -> None:
    line = f"ACCEPTANCE {key} (diagnostic, not scored): {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture
def acceptance():
    return record_acceptance


@pytest.fixture
def acceptance_note():
    return record_note


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
