import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance_record():
    """Record one acceptance criterion: record(number, passed, detail)."""

    def record(number, passed, detail):
        _ACCEPTANCE.append((number, bool(passed), detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")
