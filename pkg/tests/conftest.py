"""Shared pytest plumbing: criterion verdict lines in the terminal summary."""


def pytest_configure(config):
    config._criterion_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.write_line("")
        for line in lines:
            terminalreporter.write_line(line)
