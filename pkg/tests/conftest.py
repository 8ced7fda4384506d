import numpy as np
import pytest

from prophetlab.setfn import DirectedCut

_CRITERIA = {}


@pytest.fixture
def cut2():
    """Directed cut of u -> v."""
    return DirectedCut(2, ((0, 1, 1.0),), labels=("u", "v")).to_explicit()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report(request):
    """Attach a measured-value note to the criterion line of this test."""
    notes = []
    request.node.user_properties.append(("notes", notes))
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    failed = rep.failed or (rep.when == "setup" and not rep.passed)
    _, ok, notes = _CRITERIA.get(number, (title, True, []))
    if rep.when == "call":
        notes = notes + dict(item.user_properties).get("notes", [])
    _CRITERIA[number] = (title, ok and not failed, notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, notes = _CRITERIA[number]
        extra = f" ({'; '.join(notes)})" if notes else ""
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}{extra}")
