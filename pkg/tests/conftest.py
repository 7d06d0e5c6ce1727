import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict = {}


class AcceptanceLog:
    def record(self, key: str, ok: bool, detail: str, asserted: bool = True):
        label = "PASS" if ok else "FAIL"
        if not asserted:
            label += " (exploratory, not asserted)"
        _ACCEPTANCE[key] = f"{key} {label}: {detail}"
        print(_ACCEPTANCE[key])
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def order(k):
        return int(k[1:]) if k[1:].isdigit() else 99

    for key in sorted(_ACCEPTANCE, key=order):
        terminalreporter.write_line(_ACCEPTANCE[key])
