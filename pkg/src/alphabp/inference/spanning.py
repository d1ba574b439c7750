"""Edge appearance probabilities of uniformly random spanning trees."""

from __future__ import annotations

import numpy as np

from ..errors import StructuralError
from ..mrf import Graph
from .types import EdgeAppearance

__all__ = ["edge_appearance_probabilities", "laplacian"]


def laplacian(graph: Graph) -> np.ndarray:
    n = graph.num_nodes
    L = np.zeros((n, n))
    for s, t in graph.edges:
        L[s, t] -= 1.0
        L[t, s] -= 1.0
        L[s, s] += 1.0
        L[t, t] += 1.0
    return L


def edge_appearance_probabilities(graph: Graph) -> EdgeAppearance:
    """``mu_st`` = fraction of spanning trees containing edge ``(s, t)``.

    By the matrix-tree theorem this equals the effective resistance between
    ``s`` and ``t`` when every edge is a unit resistor, which we read off
    the Laplacian pseudo-inverse.
    """
    if not graph.is_connected():
        raise StructuralError("edge appearance probabilities need a connected graph")
    n = graph.num_nodes
    if graph.num_edges == 0:
        return EdgeAppearance(graph, np.zeros(0))
    ones = np.full((n, n), 1.0 / n)
    pinv = np.linalg.inv(laplacian(graph) + ones) - ones
    s, t = np.array(graph.edges).T
    mu = pinv[s, s] + pinv[t, t] - 2.0 * pinv[s, t]
    return EdgeAppearance(graph, np.clip(mu, 0.0, 1.0))
