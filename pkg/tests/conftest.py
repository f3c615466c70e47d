import time

import pytest

CRITERIA: dict = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call ``done(detail)`` once the checks pass."""
    number = request.node.get_closest_marker("criterion").args[0]
    state = {"detail": "", "ok": False}
    start = time.perf_counter()

    def done(detail=""):
        state["ok"] = True
        state["detail"] = detail

    yield done
    secs = time.perf_counter() - start
    CRITERIA[number] = (state["ok"], f"{secs:.1f}s", state["detail"] or request.node.name)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, secs, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({secs}) {detail}")
