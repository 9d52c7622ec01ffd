"""Shared pytest wiring: a per-criterion verdict block for the acceptance
suite.

Tests in test_acceptance.py are named ``test_p<NN>_*``, one per numbered
acceptance check. After the run, the terminal summary lists one PASS/FAIL
line per number so the overall verdict can be read without scanning
individual test output. A criterion that errored during setup counts as
FAIL; an explicitly skipped one is reported as SKIP.
"""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_p(\d+)_")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts: dict[int, str] = {}
    for status, reports in terminalreporter.stats.items():
        if status not in ("passed", "failed", "error", "skipped"):
            continue
        for rep in reports:
            nodeid = getattr(rep, "nodeid", "")
            m = _CRITERION.search(nodeid)
            if not m:
                continue
            num = int(m.group(1))
            if status == "passed":
                verdicts.setdefault(num, "PASS")
            elif status == "skipped":
                verdicts.setdefault(num, "SKIP")
            else:
                verdicts[num] = "FAIL"
    if not verdicts:
        return
    terminalreporter.section("acceptance summary")
    for num in sorted(verdicts):
        terminalreporter.write_line(f"P{num}: {verdicts[num]}")
