import numpy as np
import pytest

from noisemap.flow import FlowModel
from noisemap.operators import RealizedSystem


def random_system(rng, m, n):
    """Realized system with ``m`` complex rows (``2m`` real rows) and ``n`` pixels."""
    return RealizedSystem(rng.standard_normal((2 * m, n)))


def randomize_flow(model, rng, scale=0.3):
    """Perturb every parameter so couplings stop being the identity."""
    for p in model.params:
        p += scale * rng.standard_normal(p.shape)
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_flow():
    return randomize_flow(FlowModel.multiscale(8, (8, 4, 4), depth=2, seed=3), np.random.default_rng(7))


# -- acceptance reporting -------------------------------------------------------

_verdicts = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _verdicts[number] = (title, report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        title, outcome, duration = _verdicts[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {number:2d}  {title}  ({duration:.1f} s)")
