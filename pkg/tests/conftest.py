import pytest

_criteria = {}


@pytest.fixture
def criterion():
    """``criterion(number, title, ok, detail)`` records one acceptance line."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
        _criteria[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_criteria):
            terminalreporter.write_line(_criteria[number])
