import numpy as np
import pytest

from ucem.analytics import convert_utility
from ucem.grouping import build_plan, plan_from_groups
from ucem.model import generate_disk_scenario


@pytest.fixture(scope="session")
def table1():
    scenario = generate_disk_scenario(n=50, radius=20.0, seed=1)
    return scenario, build_plan(scenario)


@pytest.fixture(scope="session")
def table1_target():
    return convert_utility(219.0, 50, 1000, 0.005)


def random_instance(rng, n_nodes, max_groups=3):
    """Hand-built plan: random group labels and powers in [P, 4P)."""
    labels = np.sort(rng.integers(1, max_groups + 1, size=n_nodes))
    # relabel so groups are contiguous from 1
    _, labels = np.unique(labels, return_inverse=True)
    powers = 0.2 * (1 + 3 * rng.random(n_nodes))
    return plan_from_groups(labels + 1, powers)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
