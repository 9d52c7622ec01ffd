"""Terminal verdict block for the adapter's numbered acceptance checks
(``test_s<N>_*`` in test_adapter.py), mirroring the harness suite."""

import re

_CRITERION = re.compile(r"test_adapter\.py::test_s(\d+)_")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts: dict[int, str] = {}
    for status, reports in terminalreporter.stats.items():
        if status not in ("passed", "failed", "error", "skipped"):
            continue
        for rep in reports:
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
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
        terminalreporter.write_line(f"S{num}: {verdicts[num]}")
