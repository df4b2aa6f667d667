import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record():
    """Store a one-line verdict for an acceptance criterion."""

    def _record(number: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
