import time
from contextlib import contextmanager

import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """Context manager recording PASS/FAIL and runtime for one acceptance criterion."""
    results = request.config.stash[_RESULTS]

    @contextmanager
    def run(label, limit):
        start = time.perf_counter()
        try:
            yield
        except BaseException:
            results[label] = ("FAIL", time.perf_counter() - start, limit)
            raise
        elapsed = time.perf_counter() - start
        status = "PASS" if elapsed < limit else "FAIL"
        results[label] = (status, elapsed, limit)
        assert elapsed < limit, f"criterion {label} took {elapsed:.1f} s, limit {limit} s"

    return run


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for label in sorted(results, key=lambda s: (int(s.split()[0]), s)):
        status, elapsed, limit = results[label]
        terminalreporter.write_line(f"criterion {label}: {status} ({elapsed:.1f} s, limit {limit} s)")
