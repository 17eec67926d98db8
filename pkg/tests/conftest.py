from __future__ import annotations

import pytest

from singular_traces import Coupling, Geometry


@pytest.fixture
def circle():
    return Geometry(2, 1.0)


@pytest.fixture
def sphere():
    return Geometry(3, 1.0)


@pytest.fixture
def delta08():
    return Coupling("delta", 0.8)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def _report(tag: str, ok: bool, detail: str = ""):
        line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
