from __future__ import annotations

import _report


def pytest_terminal_summary(terminalreporter) -> None:
    if _report.lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in _report.lines:
            terminalreporter.write_line(line)
