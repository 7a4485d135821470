import numpy as np
import pytest

from grf.graph import WalkMatrix, from_edges, generate_erdos_renyi

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = []


def _weighted(g, seed):
    rng = np.random.default_rng(seed)
    return from_edges(g.n, [(i, j, float(rng.uniform(0.5, 2.0))) for i, j, _ in g.edges()])


def corpus():
    """Small graphs with N in {2, 3, 8, 12, 16}, including edgeless and complete."""
    return {
        "pair": from_edges(2, [(0, 1, 1.0)]),
        "edgeless3": from_edges(3, []),
        "complete8": generate_erdos_renyi(8, 1.0, 0),
        "er8": generate_erdos_renyi(8, 0.5, 3),
        "er12w": _weighted(generate_erdos_renyi(12, 0.35, 5), 5),
        "er16": generate_erdos_renyi(16, 0.25, 11),
    }


def pair_u(u=0.4):
    return WalkMatrix.from_matrix(np.array([[0.0, u], [u, 0.0]]))


def path3():
    return from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture(scope="session")
def graphs():
    return corpus()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
