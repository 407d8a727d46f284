import pytest

_LINES_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def criterion_report(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.stash.setdefault(_LINES_KEY, [])

    def record(number, passed, detail):
        lines.append((number, "PASS" if passed else "FAIL", detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
