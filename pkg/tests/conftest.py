import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}
_NODE_CRITERION = {}


def pytest_runtest_logreport(report):
    mark = _NODE_CRITERION.get(report.nodeid)
    if mark is None:
        return
    cid, title = mark
    prev = _CRITERIA.get(cid, (title, True, 0.0))
    ok = prev[1] and report.outcome != "failed"
    dur = prev[2] + (report.duration if report.when == "call" else 0.0)
    _CRITERIA[cid] = (title, ok, dur)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _NODE_CRITERION[item.nodeid] = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA):
        title, ok, dur = _CRITERIA[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {title}  ({dur:.1f} s)")
