import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nonmarkov.dynamics import counterexample_family
from nonmarkov.sampling import make_rng

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return make_rng(20240611)


@pytest.fixture(scope="session")
def counterexample():
    return counterexample_family()


@pytest.fixture(scope="session")
def tau_grid():
    return np.linspace(0.0, 4.0, 4000)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and "criterion_" in report.nodeid:
        if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
            name = report.nodeid.split("::")[-1]
            _CRITERIA[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        terminalreporter.write_line(f"{_CRITERIA[name]}  {name}")
