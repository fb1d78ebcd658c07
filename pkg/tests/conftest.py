import pytest

_ACCEPTANCE = []


@pytest.fixture
def record():
    """Record one acceptance line: record(criterion_id, passed, detail)."""

    def _rec(cid, passed, detail):
        _ACCEPTANCE.append((cid, bool(passed), detail))
        return passed

    return _rec


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid, passed, detail in _ACCEPTANCE:
        tr.write_line(f"{'PASS' if passed else 'FAIL'}  [{cid}] {detail}")
