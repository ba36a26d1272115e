"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

from collections import defaultdict

import pytest

_parts: dict[int, list[str]] = defaultdict(list)
_titles: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (report.when == "call" or report.failed or report.skipped):
        return
    number, title = marker.args
    _titles[number] = title
    _parts[number].append("skip" if report.skipped else ("pass" if report.passed else "fail"))


def pytest_terminal_summary(terminalreporter):
    if not _parts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_parts):
        parts = _parts[number]
        if "fail" in parts:
            status = "FAIL"
        elif "pass" in parts:
            status = "PASS"
        else:
            status = "SKIP"
        note = f" ({parts.count('skip')} part(s) skipped)" if status == "PASS" and "skip" in parts else ""
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {_titles[number]}{note}")
