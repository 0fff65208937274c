import pytest

_outcomes = {}


def _criterion(item):
    mark = item.get_closest_marker("criterion")
    return None if mark is None else mark.args[0]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    n = _criterion(item)
    if n is None:
        return
    failed = report.failed or (report.when == "call" and report.skipped)
    entry = _outcomes.setdefault(n, {"failed": [], "ran": False})
    if report.when == "call":
        entry["ran"] = True
    if failed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        entry = _outcomes[n]
        ok = entry["ran"] and not entry["failed"]
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}"
        if entry["failed"]:
            line += "  (" + ", ".join(entry["failed"]) + ")"
        terminalreporter.write_line(line)
