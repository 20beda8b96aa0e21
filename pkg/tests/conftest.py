import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the test asserts the same condition it reports."""

    def record(number, title, ok, detail):
        _VERDICTS.append((number, f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
