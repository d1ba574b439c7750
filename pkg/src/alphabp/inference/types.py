"""State and configuration containers for message passing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ParameterError, StructuralError
from ..mrf import Graph, PairwiseMRF

__all__ = [
    "MessageState",
    "AlphaAssignment",
    "AnnealSchedule",
    "RunConfig",
    "BeliefResult",
    "EdgeAppearance",
    "init_messages",
]


@dataclass(frozen=True, eq=False)
class MessageState:
    """One normalized message per directed edge.

    ``values[k]`` is the message along ``graph.directed_edges[k] = (t, s)``,
    i.e. ``m_ts`` as a function of ``x_s``.
    """

    graph: Graph
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.graph.num_directed:
            raise StructuralError(
                f"message array shape {v.shape} does not match {self.graph.num_directed} directed edges"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, edge: tuple[int, int]) -> np.ndarray:
        return self.values[self.graph.directed_index[tuple(edge)]]

    def __len__(self) -> int:
        return self.values.shape[0]

    def max_change(self, other: "MessageState") -> float:
        if len(self) == 0:
            return 0.0
        return float(np.max(np.abs(self.values - other.values)))


def init_messages(mrf: PairwiseMRF, seed: int | None = None) -> MessageState:
    """Uniform messages; with ``seed``, log-normal multiplicative noise is applied first."""
    k = mrf.domain.size
    vals = np.full((mrf.graph.num_directed, k), 1.0 / k)
    if seed is not None and vals.size:
        rng = np.random.Generator(np.random.Philox(seed))
        vals = np.exp(rng.standard_normal(vals.shape))
        vals /= vals.sum(axis=1, keepdims=True)
    return MessageState(mrf.graph, vals)


@dataclass(frozen=True)
class AlphaAssignment:
    """Per-undirected-edge alpha, or one scalar broadcast to every edge.

    Storing one value per undirected edge makes ``alpha_ts == alpha_st``
    hold by construction.
    """

    scalar: float | None = 1.0
    per_edge: Mapping[tuple[int, int], float] | None = None

    @classmethod
    def broadcast(cls, alpha: float) -> "AlphaAssignment":
        return cls(scalar=float(alpha))

    @classmethod
    def from_edges(cls, values: Mapping[tuple[int, int], float]) -> "AlphaAssignment":
        norm = {}
        for (s, t), a in values.items():
            key = (min(s, t), max(s, t))
            if key in norm and norm[key] != float(a):
                raise StructuralError(f"conflicting alpha for edge {key}")
            norm[key] = float(a)
        return cls(scalar=None, per_edge=norm)

    def edge_values(self, graph: Graph) -> np.ndarray:
        if self.per_edge is None:
            return np.full(graph.num_edges, float(self.scalar))
        try:
            return np.array([self.per_edge[e] for e in graph.edges], dtype=float)
        except KeyError as exc:
            raise StructuralError(f"no alpha assigned to edge {exc.args[0]}") from None

    def directed_values(self, graph: Graph) -> np.ndarray:
        return self.edge_values(graph)[graph.topology.und]


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear interpolation of the broadcast alpha over ``num_iterations`` steps."""

    alpha_start: float
    alpha_end: float
    num_iterations: int

    def __post_init__(self):
        if self.num_iterations < 1:
            raise ParameterError("anneal schedule needs at least one iteration")

    def alpha_at(self, n: int) -> float:
        last = self.num_iterations - 1
        if last == 0 or n >= last:
            return float(self.alpha_end)
        if n <= 0:
            return float(self.alpha_start)
        return float(self.alpha_start + (self.alpha_end - self.alpha_start) * n / last)


@dataclass(frozen=True)
class RunConfig:
    max_iterations: int = 200
    tolerance: float = 1e-6
    damping: float | None = None
    anneal: AnnealSchedule | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ParameterError("max_iterations must be >= 0")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be > 0")
        if self.damping is not None and not 0 < self.damping < 1:
            raise ParameterError("damping must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class BeliefResult:
    marginals: np.ndarray  # (N, K)
    converged: bool
    iterations_used: int
    residual_trace: tuple[float, ...]
    final_messages: MessageState | None = None

    def to_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations_used),
            "residuals": [float(r) for r in self.residual_trace],
            "marginals": np.asarray(self.marginals, dtype=float).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class EdgeAppearance:
    """Edge appearance probabilities, one per undirected edge in graph order."""

    graph: Graph
    mu: np.ndarray = field(repr=False)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if mu.shape != (self.graph.num_edges,):
            raise StructuralError("one mu value is required per edge")
        if np.any(mu <= 0) or np.any(mu > 1 + 1e-12):
            raise ParameterError("edge appearance probabilities must lie in (0, 1]")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    def __getitem__(self, edge: tuple[int, int]) -> float:
        s, t = edge
        return float(self.mu[self.graph.edge_index[(min(s, t), max(s, t))]])

    def directed_values(self) -> np.ndarray:
        return self.mu[self.graph.topology.und]
