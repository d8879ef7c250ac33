import json
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"
PKG_DATA = Path(__file__).resolve().parents[1] / "src" / "mpchannel" / "data"


@pytest.fixture(scope="session")
def frozen():
    return json.loads((DATA / "frozen.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def pkg_data():
    return PKG_DATA


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class Criterion:
    def __init__(self, number: int, name: str):
        self.number, self.name = number, name
        self.details: list[str] = []
        self.recorded = False

    def note(self, text: str) -> None:
        self.details.append(text)

    def check(self, passed: bool, detail: str = "") -> None:
        if detail:
            self.details.append(detail)
        _ACCEPTANCE[self.number] = (self.name, bool(passed), "; ".join(self.details))
        self.recorded = True
        assert passed, f"criterion {self.number} ({self.name}) failed: {'; '.join(self.details)}"


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("acceptance")
    crit = Criterion(*marker.args)
    yield crit
    if not crit.recorded:
        _ACCEPTANCE[crit.number] = (crit.name, False, "; ".join(crit.details + ["did not complete"]))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, name): acceptance criterion with a PASS/FAIL line")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        name, ok, detail = _ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{num:2d}] {name}: {detail}")
