"""Seeded Erdos-Renyi graphs and Gaussian Ising couplings.

Every draw comes from a Philox counter-based generator keyed by
``SeedSequence((seed, stream))``. Graph and potential draws use different
stream ids, so changing sigma never changes the sampled graph.

Coupling draws are made for *all* ``n(n-1)/2`` node pairs in lexicographic
order and then masked by the edge set. Together with the uniform-threshold
edge rule this couples experiments: for a fixed seed, the gamma=0.2 graph is
a subgraph of the gamma=0.4 graph, and J scales linearly in sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SamplingExhausted
from .mrf import Graph, IsingModel

__all__ = [
    "GraphSpec",
    "PotentialSpec",
    "erdos_renyi",
    "sample_ising",
    "sample_certified",
    "make_rng",
    "derive_seed",
]

_GRAPH_STREAM = 0x47
_POTENTIAL_STREAM = 0x50


def make_rng(*key: int) -> np.random.Generator:
    """Philox generator keyed by a tuple of nonnegative integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 64-bit sub-seed for trial/retry ``path`` under ``seed``."""
    ss = np.random.SeedSequence([int(seed), *map(int, path)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class GraphSpec:
    n: int
    gamma: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ParameterError("gamma must lie in [0, 1]")


@dataclass(frozen=True)
class PotentialSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError("sigma must be > 0")


def erdos_renyi(spec: GraphSpec) -> Graph:
    """Include each pair ``s < t`` (lexicographic order) with probability gamma."""
    n = spec.n
    iu, ju = np.triu_indices(n, 1)
    u = make_rng(spec.seed, _GRAPH_STREAM).random(iu.size)
    keep = u < spec.gamma
    return Graph(n, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))


def sample_ising(graph: Graph, spec: PotentialSpec) -> IsingModel:
    """``J_st ~ N(0, sigma^2)`` on edges, zero elsewhere; ``b_s ~ N(0, (sigma/4)^2)``."""
    n = graph.num_nodes
    rng = make_rng(spec.seed, _POTENTIAL_STREAM)
    iu, ju = np.triu_indices(n, 1)
    pair_draws = rng.standard_normal(iu.size)
    node_draws = rng.standard_normal(n)
    J = np.zeros((n, n))
    if graph.num_edges:
        lookup = {(int(s), int(t)): k for k, (s, t) in enumerate(zip(iu, ju))}
        s, t = np.array(graph.edges).T
        w = spec.sigma * pair_draws[[lookup[e] for e in graph.edges]]
        J[s, t] = w
        J[t, s] = w
    b = (spec.sigma / 4.0) * node_draws
    return IsingModel(J, b, graph)


def sample_certified(
    graph_spec: GraphSpec,
    potential_spec: PotentialSpec,
    alphas,
    max_retries: int = 100,
) -> tuple[Graph, IsingModel, int]:
    """Resample until the singular-value certificate holds.

    Attempt ``k`` uses sub-seeds derived from ``(seed, k)``. Returns the
    accepted graph, model and the number of rejected attempts.
    """
    from .convergence import certify, theta_from_ising

    if max_retries < 1:
        raise ParameterError("max_retries must be >= 1")
    last = None
    for attempt in range(max_retries):
        gs = GraphSpec(graph_spec.n, graph_spec.gamma, derive_seed(graph_spec.seed, attempt))
        ps = PotentialSpec(potential_spec.sigma, derive_seed(potential_spec.seed, attempt))
        graph = erdos_renyi(gs)
        model = sample_ising(graph, ps)
        cert = certify(theta_from_ising(model), alphas)
        last = cert.lambda_star
        if cert.theorem1_holds:
            return graph, model, attempt
    raise SamplingExhausted(
        f"no certified sample in {max_retries} attempts (last lambda*={last:.6g})", last_lambda=last
    )
