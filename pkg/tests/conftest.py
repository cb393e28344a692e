"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import re

_CRITERIA: dict[int, dict] = {}
_NAME = re.compile(r"test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    m = _NAME.search(report.nodeid)
    if not m:
        return
    if report.when != "call" and not (report.failed or report.skipped):
        return
    entry = _CRITERIA.setdefault(int(m.group(1)), {"ok": True, "details": []})
    if report.failed or report.skipped:
        entry["ok"] = False
    entry["details"] += [v for k, v in report.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        status = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"criterion {num:2d}: {status}" + (f"  ({detail})" if detail else ""))
