import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one acceptance criterion outcome; the line is printed now and in the terminal summary."""
    def record(number: int, ok: bool, detail: str) -> None:
        prev = _RESULTS.get(number)
        if prev is not None:
            ok, detail = ok and prev[0], f"{prev[1]}; {detail}"
        _RESULTS[number] = (ok, detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} ({detail})")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} ({detail})")
