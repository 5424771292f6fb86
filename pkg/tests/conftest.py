from pathlib import Path

import pytest

from cddhorn.horn_io import load

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


@pytest.fixture
def s_da():
    return load(fixture_path("s_da.smt2"))


@pytest.fixture
def s_dd():
    return load(fixture_path("s_dd.chc"))


@pytest.fixture
def counter_unsafe():
    return load(fixture_path("counter_unsafe.smt2"))


@pytest.fixture
def counter_safe():
    return load(fixture_path("counter_safe.smt2"))


# Acceptance criteria report one line each; the lines are repeated in the
# terminal summary so they are visible without ``-s``.
ACCEPTANCE_LINES: list[str] = []


def record(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
