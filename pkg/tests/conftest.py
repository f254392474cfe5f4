import sys

from hypothesis import settings

from props import SEED

settings.register_profile("default", max_examples=60, deadline=None, derandomize=False)
settings.load_profile("default")


def pytest_report_header(config):
    return f"hypothesis seed: {SEED}"


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
