from __future__ import annotations

import re

import pytest

# criterion number -> (passed, detail); filled by the acceptance suite
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class Criterion:
    def __init__(self, number: int):
        self.number = number
        self.recorded = False

    def __call__(self, ok: bool, detail: str) -> None:
        self.recorded = True
        ACCEPTANCE[self.number] = (bool(ok), detail)
        print(line(self.number, bool(ok), detail))
        assert ok, detail


def line(number: int, ok: bool, detail: str) -> str:
    return f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.fixture
def criterion(request):
    m = re.search(r"criterion_(\d+)", request.node.name)
    rec = Criterion(int(m.group(1)))
    yield rec
    if not rec.recorded:
        ACCEPTANCE[rec.number] = (False, "raised before reaching a verdict")
        print(line(rec.number, False, "raised before reaching a verdict"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(line(number, *ACCEPTANCE[number]))
