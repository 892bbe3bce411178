import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(request):
    """Dict of measured values reported next to the criterion's pass/fail line."""
    request.node.criterion_detail = {}
    return request.node.criterion_detail


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    number, title = marker.args
    status = "PASS" if rep.passed else "FAIL"
    detail = getattr(item, "criterion_detail", {})
    extra = " ".join(f"{k}={v}" for k, v in detail.items())
    line = f"criterion {number:>2} {status}  {title}" + (f"  [{extra}]" if extra else "")
    item.config._criterion_lines = getattr(item.config, "_criterion_lines", []) + [(number, line)]
    print("\n" + line)


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
