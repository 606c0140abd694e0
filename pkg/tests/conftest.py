import itertools

import numpy as np
import pytest
from hypothesis import settings

from graspcause.graph import CausalGraph, Node

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def random_dag(rng: np.random.Generator, n_nodes: int, p: float = 0.4) -> CausalGraph:
    """Random DAG whose edges respect a random node permutation."""
    names = [f"V{i}" for i in range(n_nodes)]
    order = rng.permutation(n_nodes)
    edges = [
        (names[order[i]], names[order[j]])
        for i, j in itertools.combinations(range(n_nodes), 2)
        if rng.random() < p
    ]
    return CausalGraph(tuple(Node(n) for n in names), tuple(edges))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
