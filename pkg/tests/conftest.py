import itertools

import numpy as np
import pytest

from alphabp import BINARY, Domain, Graph, IsingModel, PairwiseMRF


def random_tree(rng, n):
    """Uniform-attachment random tree on ``n`` nodes."""
    return Graph(n, tuple((int(rng.integers(0, t)), t) for t in range(1, n)))


def random_graph(rng, n, p=0.4):
    edges = tuple((s, t) for s, t in itertools.combinations(range(n), 2) if rng.random() < p)
    return Graph(n, edges)


def random_mrf(rng, graph, k=2, scale=1.0):
    dom = BINARY if k == 2 else Domain(tuple(range(k)))
    unary = np.exp(scale * rng.normal(size=(graph.num_nodes, k)))
    pair = np.exp(scale * rng.normal(size=(graph.num_edges, k, k)))
    return PairwiseMRF.from_potentials(graph, dom, unary, pair)


def random_ising(rng, graph, sigma=0.5):
    n = graph.num_nodes
    J = np.zeros((n, n))
    for s, t in graph.edges:
        J[s, t] = J[t, s] = sigma * rng.normal()
    return IsingModel(J, (sigma / 4) * rng.normal(size=n), graph)


def chain(n):
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle(n):
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)) + ((0, n - 1),))


def complete(n):
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
