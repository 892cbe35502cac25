import contextlib
import time

import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """Context manager recording one acceptance criterion's outcome."""
    results = request.config.stash[_RESULTS]

    @contextlib.contextmanager
    def record(number: int, title: str):
        notes: list = []
        start = time.perf_counter()
        try:
            yield notes
        except BaseException as exc:
            results[number] = (False, title, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        detail = "; ".join(notes)
        results[number] = (True, title, f"{detail} ({time.perf_counter() - start:.1f}s)".strip())

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(results):
        ok, title, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} -- {detail}")
