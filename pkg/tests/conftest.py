from __future__ import annotations

import pytest

_RESULTS: dict[int, tuple[bool, list[str]]] = {}


@pytest.fixture
def acceptance():
    """Record sub-checks for one acceptance criterion and assert them all."""

    class Recorder:
        def __init__(self) -> None:
            self.checks: list[tuple[str, bool]] = []

        def check(self, label: str, ok: bool) -> None:
            self.checks.append((label, bool(ok)))

        def finish(self, criterion: int) -> None:
            ok = all(passed for _, passed in self.checks)
            lines = [f"{'ok ' if passed else 'BAD'} {label}" for label, passed in self.checks]
            _RESULTS[criterion] = (ok, lines)
            failed = [label for label, passed in self.checks if not passed]
            assert not failed, "; ".join(failed)

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_RESULTS):
        ok, lines = _RESULTS[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}")
        for line in lines:
            terminalreporter.write_line(f"    {line}")
