import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Acceptance criteria record their outcome here; printed after the run.
ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" in report.nodeid and name.startswith("test_criterion_"):
        if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
            ACCEPTANCE[name] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n.split("_")[2])):
        outcome, secs = ACCEPTANCE[name]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  ({secs:.1f} s)")
