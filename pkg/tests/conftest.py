"""Acceptance reporting: one PASS/FAIL line per criterion in the terminal summary."""
from collections import defaultdict

_OUTCOMES = defaultdict(list)
_TITLES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion the test belongs to")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call" and not (call.when == "setup" and call.excinfo is not None):
        return
    key, title = mark.args
    _TITLES[key] = title
    # an xfail counts as a literal FAIL of the criterion, even though the suite stays green
    _OUTCOMES[key].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_OUTCOMES, key=lambda k: (str(k).split("-")[0].zfill(3), str(k))):
        verdict = "PASS" if all(_OUTCOMES[key]) else "FAIL"
        terminalreporter.write_line(f"criterion {key}: {verdict}  {_TITLES[key]}")
