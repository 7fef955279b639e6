import pytest

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def criterion():
    """``criterion(k, ok, detail)`` logs a pass/fail line for acceptance criterion k."""

    def record(k, ok, detail):
        prev = ACCEPTANCE_LINES.get(k)
        ok = bool(ok) and (prev is None or prev[0])
        details = detail if prev is None else f"{prev[1]}; {detail}"
        ACCEPTANCE_LINES[k] = (ok, details)
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
