import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_line():
    def _record(line: str) -> None:
        print(line)
        ACCEPTANCE_LINES.append(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
