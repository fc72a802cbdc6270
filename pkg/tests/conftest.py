import pytest

ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def report():
    """Record one acceptance line; printed again in the terminal summary."""
    def record(key: str, passed: bool | None, detail: str) -> bool | None:
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {key}: {status}  {detail}"
        ACCEPTANCE_LINES[key] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
