"""Collects one verdict line per acceptance criterion and prints them at the end of the run."""
import re

VERDICTS = []


def verdict(name, ok, detail):
    """Record ``name`` as PASS/FAIL with a detail string, then assert ``ok``."""
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(re.search(r"C(\d+)", s).group(1))):
            terminalreporter.write_line(line)
