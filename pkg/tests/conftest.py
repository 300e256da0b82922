import numpy as np
import pytest

# criterion number -> list of (test id, passed, details)
_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    details = [v for k, v in item.user_properties if k == "detail"]
    _CRITERIA.setdefault(marker.args[0], []).append((item.name, rep.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        runs = _CRITERIA[n]
        ok = all(p for _, p, _ in runs)
        notes = "; ".join(d for _, _, ds in runs for d in ds)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} ({len(runs)} checks) {notes}")
