import math

import pytest

from hpzqbm import BathMode, BathSpec, Discrete, SystemParams

CONFIGS = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"


def discrete_bath(couplings, freqs, beta=math.inf, masses=None):
    masses = masses or [1.0] * len(couplings)
    return BathSpec(Discrete(tuple(BathMode(c, m, w) for c, m, w in zip(couplings, masses, freqs))), beta=beta)


@pytest.fixture
def three_mode():
    return SystemParams(1.0, 1.0), discrete_bath([0.3, 0.2, 0.25], [1.5, 0.7, 2.3], beta=2.0)


@pytest.fixture
def single_mode():
    return SystemParams(1.0, 1.0), discrete_bath([0.2], [2.0], beta=2.0)


@pytest.fixture
def decoupled():
    return SystemParams(1.0, 1.0), BathSpec(Discrete(()))


# one summary line per acceptance criterion, shown at the end of every run
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
