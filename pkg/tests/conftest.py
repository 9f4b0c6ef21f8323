from __future__ import annotations

import sys
from pathlib import Path

# test-only helpers (extended-precision oracles) live beside the tests
sys.path.insert(0, str(Path(__file__).resolve().parent))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    summary = getattr(module, "SUMMARY", None)
    if not summary:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(summary):
        terminalreporter.write_line(summary[number])
