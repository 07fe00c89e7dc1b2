import numpy as np
import pytest

from l2s_disco.experiment import warm_start_state
from l2s_disco.objectives import Contamination


@pytest.fixture
def frozen_state():
    """Factory for a UCB state fitted to 20 random contamination evaluations."""

    def make(d=10, seed=0, kind="ucb"):
        obj = Contamination(d=d, seed=seed)
        return obj.space, warm_start_state(obj, 20, seed, kind)

    return make


def is_neighbor_chain(space, states, kind):
    for a, b in zip(states, states[1:]):
        if not any(np.array_equal(b, n) for n in space.neighbors(a, kind)):
            return False
    return True


_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record and print a PASS/FAIL line for one acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
