import pytest

_ACCEPTANCE: dict = {}


class AcceptanceRecorder:
    """Collects one verdict per acceptance criterion for the session summary."""

    def __call__(self, number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"[{number}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, max(_ACCEPTANCE) + 1):
        terminalreporter.write_line(_ACCEPTANCE.get(number, f"[{number}] ----  not run"))
