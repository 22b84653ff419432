import numpy as np
import pytest

from ptree.base import BaseMeasure
from ptree.markov import StateModel

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_ACCEPTANCE.items(), key=lambda kv: kv[0]):
        name = nodeid.split("::")[-1].removeprefix("test_")
        parts = name.split("_")
        if parts[0] == "criterion":
            name = f"criterion {parts[1]}: {' '.join(parts[2:])}"
        terminalreporter.write_line(f"{name:55s} {'PASS' if outcome == 'passed' else 'FAIL'}")


@pytest.fixture
def unit1():
    return BaseMeasure.uniform([0.0], [1.0])


@pytest.fixture
def unit2():
    return BaseMeasure.uniform([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def opt1(unit1):
    return StateModel.opt(unit1)


@pytest.fixture
def opt2(unit2):
    return StateModel.opt(unit2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
