import numpy as np
import pytest

from ksgap import solve_stationary

FOUR_PI = 4 * np.pi
SEVEN_PI = 7 * np.pi


@pytest.fixture(scope="session")
def profiles():
    cache = {}

    def get(mass):
        if mass not in cache:
            cache[mass] = solve_stationary(mass)
        return cache[mass]

    return get


@pytest.fixture(scope="session")
def tiny(profiles):
    return profiles(1e-3)


@pytest.fixture(scope="session")
def unit(profiles):
    return profiles(1.0)


@pytest.fixture(scope="session")
def mid(profiles):
    return profiles(FOUR_PI)


@pytest.fixture(scope="session")
def heavy(profiles):
    return profiles(SEVEN_PI)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in rep.user_properties if k == "criterion"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
