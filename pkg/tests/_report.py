"""Shared registry for acceptance-criterion result lines.

test_acceptance.py appends one line per criterion; conftest.py prints them
in the terminal summary so the verdicts are visible in a plain pytest run.
"""

from __future__ import annotations

lines: list[str] = []


def record(passed: bool, number: int, title: str, detail: str = "") -> None:
    verdict = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    lines.append(f"{verdict} criterion {number}: {title}{suffix}")
