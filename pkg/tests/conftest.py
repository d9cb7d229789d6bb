import pytest

# criterion id -> (title, passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record the measured detail for an acceptance criterion."""
    marker = request.node.get_closest_marker("criterion")
    cid, title = marker.args
    entry = {"title": title, "detail": ""}
    ACCEPTANCE[cid] = entry

    def note(text):
        entry["detail"] = text

    return note


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    entry = ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1], "detail": ""})
    entry["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[2:])):
        e = ACCEPTANCE[cid]
        status = {True: "PASS", False: "FAIL"}.get(e.get("passed"), "SKIP")
        line = f"{status} {cid} {e['title']}"
        if e["detail"]:
            line += f": {e['detail']}"
        terminalreporter.write_line(line)
