import time

import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


class Criterion:
    def __init__(self, number: int, limit: float | None):
        self.number = number
        self.limit = limit
        self.start = time.perf_counter()

    def finish(self, ok: bool, detail: str) -> bool:
        elapsed = time.perf_counter() - self.start
        if self.limit is not None and elapsed > self.limit:
            ok = False
            detail += f"; runtime {elapsed:.1f}s over {self.limit:g}s"
        else:
            detail += f"; {elapsed:.1f}s"
        _RESULTS[self.number] = (ok, detail)
        return ok


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, limit = marker.args
    c = Criterion(number, limit)
    yield c
    if number not in _RESULTS:
        _RESULTS[number] = (False, "raised before completing")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, seconds): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
