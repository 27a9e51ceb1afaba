import numpy as np
import pytest

from foggen.synthetic import make_scene


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scene():
    return make_scene(width=128, height=64, seed=3)


# one summary line per acceptance criterion, printed after the run
_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or report.failed:
        detail = getattr(item, "acceptance_detail", "")
        _acceptance[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, status, detail = _acceptance[number]
        line = f"[{status}] criterion {number:>2}: {title}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
