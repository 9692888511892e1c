import numpy as np
import pytest

from gomkcn.graph import Graph


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_weighted_graph(n, d, rng):
    """Symmetric weighted adjacency with entries in [0, 1], random features."""
    upper = np.triu(rng.uniform(0.0, 1.0, (n, n)), k=1)
    return Graph(upper + upper.T, rng.uniform(0.0, 1.0, (n, d)))


def random_binary_graph(n, d, rng, p=0.4):
    upper = np.triu((rng.uniform(0.0, 1.0, (n, n)) < p).astype(float), k=1)
    return Graph(upper + upper.T, rng.uniform(0.0, 1.0, (n, d)))


@pytest.fixture
def weighted_graph_factory():
    return random_weighted_graph


@pytest.fixture
def binary_graph_factory():
    return random_binary_graph
