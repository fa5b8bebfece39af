"""Shared pytest plumbing.

Acceptance tests record one verdict line each; echoing them from the
terminal-summary hook keeps them visible under default output capture.
"""

ACCEPTANCE_VERDICTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
