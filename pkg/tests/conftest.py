import re

_VERDICT = re.compile(r"^(PASS|FAIL) criterion \d+.*$", re.M)
_lines = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _lines.extend(m.group(0) for m in _VERDICT.finditer(report.capstdout))


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for line in _lines:
            terminalreporter.write_line(line)
