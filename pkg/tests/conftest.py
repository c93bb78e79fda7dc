"""Shared pytest plumbing.

Acceptance tests (tests/test_acceptance.py) register a one-line verdict per
criterion through `tests._acceptance_report.record_criterion`; the collected
lines are printed in the terminal summary so every run ends with an explicit
pass/fail line for each criterion, even when output capture is on.
"""

from tests._acceptance_report import lines as _criterion_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _criterion_lines:
        terminalreporter.write_line(line)
