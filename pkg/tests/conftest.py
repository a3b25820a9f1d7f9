import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# acceptance outcomes, filled in by test_acceptance
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 12):
        if k not in CRITERIA:
            terminalreporter.write_line(f"criterion {k:2d} ----  not run")
            continue
        name, ok, detail = CRITERIA[k]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {k:2d} {status}  {name}: {detail}")
