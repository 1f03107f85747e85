import math

import numpy as np
import pytest

from cdlab.harness import density_family, reference_space


@pytest.fixture(scope="session")
def circle256():
    return reference_space("circle", 256)


@pytest.fixture(scope="session")
def interval256():
    return reference_space("interval", 256)


@pytest.fixture(scope="session")
def circle64():
    return reference_space("circle", 64)


@pytest.fixture(scope="session")
def interval64():
    return reference_space("interval", 64)


@pytest.fixture(scope="session")
def circle_family(circle256):
    return density_family(circle256)


@pytest.fixture(scope="session")
def interval_family(interval256):
    return density_family(interval256)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(rng, n, floor=0.05):
    v = rng.random(n) + floor
    return v


TWO_PI = 2 * math.pi


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record ``(label, passed, detail)``; printed now and again in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(label: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
