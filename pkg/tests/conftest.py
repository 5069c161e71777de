"""Collects one pass/fail line per acceptance criterion and prints them at the end of the run."""

import contextlib

import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


class CriterionRecorder:
    def __init__(self):
        self.notes: list[str] = []

    def note(self, text: str) -> None:
        self.notes.append(text)

    @contextlib.contextmanager
    def check(self, number: int, title: str):
        self.notes = []
        try:
            yield self
        except BaseException as exc:
            detail = "; ".join(self.notes + [f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"])
            _RESULTS[number] = (False, f"{title} ({detail})")
            raise
        _RESULTS[number] = (True, f"{title} ({'; '.join(self.notes)})" if self.notes else title)


@pytest.fixture
def criterion():
    return CriterionRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, text = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}")
