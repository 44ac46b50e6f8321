"""Collects acceptance verdicts and prints them at the end of the run."""
from typing import List

import pytest

_VERDICTS: List[str] = []


class Verdicts:
    def record(self, criterion: int, title: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion:>2} {title}: {detail}"
        _VERDICTS.append(line)
        print(line)


@pytest.fixture(scope="session")
def verdicts() -> Verdicts:
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
