"""Acceptance reporting: one PASS/FAIL line per criterion after the run."""

import pytest

_RESULTS = {}


@pytest.fixture
def measured(request):
    """Record measured values shown next to the criterion's verdict."""
    notes = []
    request.node.user_properties.append(("measured", notes))

    def note(text):
        notes.append(str(text))

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        notes = next((v for k, v in item.user_properties if k == "measured"), [])
        _RESULTS[marker.args[0]] = (marker.args[1], report.passed, list(notes))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")

    def key(cid):
        digits = "".join(c for c in cid if c.isdigit())
        return int(digits), cid

    for cid in sorted(_RESULTS, key=key):
        desc, ok, notes = _RESULTS[cid]
        line = f"{'PASS' if ok else 'FAIL'}  [{cid:>3}] {desc}"
        if notes:
            line += "  (" + "; ".join(notes) + ")"
        terminalreporter.write_line(line)
