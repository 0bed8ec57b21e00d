import pytest

from rank1lab import reference_spec

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def ref():
    """Reference double staircase; shared so lag tables are built once."""
    return reference_spec()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
