import sys


def pytest_terminal_summary(terminalreporter):
    # stdout capture hides the per-criterion lines on passing tests; replay
    # them here so the run log always carries one verdict per criterion.
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
