import pytest

_RESULTS = []


@pytest.fixture
def record_criterion():
    """Record one PASS/FAIL line per acceptance criterion and print it at once."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _RESULTS.append(line)
        print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
