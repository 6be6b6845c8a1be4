import random

import pytest

from mobsched.simtarget import load_target_spec


@pytest.fixture(scope="session")
def shallow():
    return load_target_spec("shallow-magic")


@pytest.fixture(scope="session")
def cmp_heavy():
    return load_target_spec("cmp-heavy")


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get(
        "tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
