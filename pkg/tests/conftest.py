import re
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from critnorm.spectral_core import Grid

settings.register_profile(
    "critnorm",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("critnorm")

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_OUTCOMES: dict[int, list[tuple[str, str]]] = defaultdict(list)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    m = _CRITERION.search(report.nodeid)
    if m:
        _OUTCOMES[int(m.group(1))].append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        runs = _OUTCOMES.get(n)
        if not runs:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
            continue
        ok = all(outcome == "passed" for _, outcome in runs)
        names = ", ".join(name for name, _ in runs)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} ({names})")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def grid8():
    return Grid.cubic(8)


@pytest.fixture(scope="session")
def grid16():
    return Grid.cubic(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid.cubic(32)
