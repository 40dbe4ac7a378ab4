import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cpinstruments.generators import corpus as build_corpus

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance results, filled by test_acceptance.py and printed at the end
ACCEPTANCE = {}
WALL_CLOCK_LIMIT = 60.0      # seconds, full suite (criterion 10)
_START = []


def pytest_sessionstart(session):
    _START.append(time.perf_counter())


def pytest_sessionfinish(session, exitstatus):
    if 10 not in ACCEPTANCE:
        return
    elapsed = time.perf_counter() - _START[0]
    passed, text = ACCEPTANCE[10]
    within = elapsed < WALL_CLOCK_LIMIT
    ACCEPTANCE[10] = (passed and within, f"{text}; suite wall-clock {elapsed:.1f}s")
    if not within and session.exitstatus == 0:
        session.exitstatus = 1


@pytest.fixture(scope="session")
def corpus():
    return build_corpus(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}")
