import pytest

_VERDICTS = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; ``verdict(ok, detail)`` then asserts ``ok``."""

    def record(ok, detail):
        name = request.node.name
        _VERDICTS.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
