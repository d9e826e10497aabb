import pytest

_RESULTS: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def acceptance():
    """record(criterion, ok, detail): collected into one line per criterion."""
    def record(criterion: int, ok: bool, detail: str):
        _RESULTS.setdefault(criterion, []).append((bool(ok), detail))
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(_RESULTS):
        parts = _RESULTS[c]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
