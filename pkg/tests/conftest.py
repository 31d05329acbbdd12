"""Shared fixtures and the acceptance summary printed after the run."""

from __future__ import annotations

import time

import numpy as np
import pytest

from ttgo.suites import get_suite, train_suite

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_c" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    prev = _ACCEPTANCE.get(name, ("passed", ""))[0]
    if report.when == "call" or report.outcome != "passed":
        outcome = report.outcome if prev == "passed" else prev
        _ACCEPTANCE[name] = (outcome, f"{report.duration:.1f}s" if report.when == "call" else report.when)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        outcome, info = _ACCEPTANCE[name]
        mark = "PASS" if outcome == "passed" else "FAIL" if outcome == "failed" else outcome.upper()
        tr.write_line(f"{mark:5s} {name}  ({info})")
    n_pass = sum(o == "passed" for o, _ in _ACCEPTANCE.values())
    tr.write_line(f"{n_pass}/{len(_ACCEPTANCE)} acceptance criteria passed")


class _SuiteModels:
    """Trains each named suite once per session; ``seconds[name]`` holds the training time."""

    def __init__(self):
        self.cache = {}
        self.seconds = {}

    def __call__(self, name: str):
        if name not in self.cache:
            suite = get_suite(name)
            t0 = time.perf_counter()
            model = train_suite(suite)
            self.seconds[name] = time.perf_counter() - t0
            self.cache[name] = (suite, suite.problem(), model)
        return self.cache[name]


@pytest.fixture(scope="session")
def suite_model():
    """Callable returning ``(suite, problem, model)`` for a suite name."""
    return _SuiteModels()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
