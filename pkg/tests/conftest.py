import numpy as np
import pytest

# parameter ranges used by the randomized checks
RANGES = {
    "lognormal": lambda r: [r.uniform(-1, 2), r.uniform(0.05, 1.5)],
    "invgauss": lambda r: [np.exp(r.uniform(-1, 1.5)), r.uniform(0.05, 1.5)],
    "gamma": lambda r: [np.exp(r.uniform(-1, 2)), np.exp(r.uniform(-1, 2))],
    "dagum": lambda r: [r.uniform(1.5, 6), np.exp(r.uniform(-1, 2)), r.uniform(0.3, 3)],
}

FAMILY_NAMES = sorted(RANGES)


def random_theta(name, rng):
    return RANGES[name](rng)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
