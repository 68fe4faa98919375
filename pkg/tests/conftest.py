import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Collect one summary line per acceptance criterion for the terminal report."""
    def add(number: int, passed: bool, detail: str):
        line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
