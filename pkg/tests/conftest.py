"""Per-criterion pass/fail summary for the acceptance suite."""

from collections import defaultdict

import pytest

_results = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    numbers = [m.args[0] for m in item.iter_markers("criterion")]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        for number in numbers:
            _results[number].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        outcomes = _results[number]
        ok = all(o == "passed" for o in outcomes)
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if ok else 'FAIL'} ({len(outcomes)} checks)")
