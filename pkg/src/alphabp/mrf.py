"""Discrete pairwise Markov random fields and the Ising special case.

Potentials are kept in log space. Public accessors return linear-scale
tables, so callers never see the internal representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, StructuralError

__all__ = [
    "Domain",
    "Graph",
    "PairwiseMRF",
    "IsingModel",
    "BINARY",
    "ising_to_mrf",
    "mrf_log_score",
    "load_model",
    "dump_model",
    "model_from_dict",
    "model_to_dict",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Domain:
    """Ordered finite label set. Index 0 is the first label."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        if len(labels) < 2:
            raise DomainError("a domain needs at least two labels")
        if len(set(labels)) != len(labels):
            raise DomainError(f"duplicate labels in domain {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def is_binary(self) -> bool:
        return self.labels == (-1, 1)

    def index(self, label: int) -> int:
        try:
            return self.labels.index(int(label))
        except ValueError:
            raise DomainError(f"state {label!r} not in domain {self.labels}") from None


BINARY = Domain((-1, 1))


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..num_nodes-1``.

    Edges are stored as sorted ``(s, t)`` pairs with ``s < t``. Directed
    edges are enumerated in lexicographic ``(source, target)`` order; every
    array-valued quantity indexed by directed edge in this package uses
    that order.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        n = int(self.num_nodes)
        if n < 0:
            raise StructuralError("num_nodes must be nonnegative")
        seen = set()
        for s, t in self.edges:
            s, t = int(s), int(t)
            if s == t:
                raise StructuralError(f"self-loop at node {s}")
            if not (0 <= s < n and 0 <= t < n):
                raise StructuralError(f"edge ({s}, {t}) out of range for {n} nodes")
            key = (min(s, t), max(s, t))
            if key in seen:
                raise StructuralError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges)}

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for s, t in self.edges:
            nbrs[s].append(t)
            nbrs[t].append(s)
        return tuple(tuple(sorted(v)) for v in nbrs)

    def neighbors(self, s: int) -> tuple[int, ...]:
        return self.adjacency[s]

    def degree(self, s: int) -> int:
        return len(self.adjacency[s])

    @cached_property
    def directed_edges(self) -> tuple[tuple[int, int], ...]:
        out = [(s, t) for s, t in self.edges] + [(t, s) for s, t in self.edges]
        return tuple(sorted(out))

    @property
    def num_directed(self) -> int:
        return 2 * len(self.edges)

    @cached_property
    def directed_index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.directed_edges)}

    @cached_property
    def topology(self) -> "Topology":
        return Topology.from_graph(self)

    def has_edge(self, s: int, t: int) -> bool:
        return (min(s, t), max(s, t)) in self.edge_index

    def is_connected(self) -> bool:
        if self.num_nodes <= 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.num_nodes

    def is_forest(self) -> bool:
        parent = list(range(self.num_nodes))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for s, t in self.edges:
            rs, rt = find(s), find(t)
            if rs == rt:
                return False
            parent[rs] = rt
        return True


@dataclass(frozen=True)
class Topology:
    """Index arrays over directed edges used by the vectorized engines.

    ``excl`` is the sparse 0/1 matrix with ``excl[e, e'] = 1`` when
    ``e = t->s`` and ``e' = w->t`` for some ``w != s``; ``incoming`` maps
    directed edges onto their target node.
    """

    src: np.ndarray
    dst: np.ndarray
    rev: np.ndarray
    und: np.ndarray
    forward: np.ndarray  # True when src < dst
    excl: sp.csr_matrix
    incoming: sp.csr_matrix

    @classmethod
    def from_graph(cls, graph: Graph) -> "Topology":
        dedges = graph.directed_edges
        m = len(dedges)
        src = np.array([t for t, _ in dedges], dtype=np.intp)
        dst = np.array([s for _, s in dedges], dtype=np.intp)
        didx = graph.directed_index
        rev = np.array([didx[(s, t)] for t, s in dedges], dtype=np.intp)
        und = np.array(
            [graph.edge_index[(min(t, s), max(t, s))] for t, s in dedges], dtype=np.intp
        )
        rows, cols = [], []
        by_target: dict[int, list[int]] = {}
        for k, (t, s) in enumerate(dedges):
            by_target.setdefault(s, []).append(k)
        for k, (t, s) in enumerate(dedges):
            for kk in by_target.get(t, ()):
                if dedges[kk][0] != s:
                    rows.append(k)
                    cols.append(kk)
        excl = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(m, m), dtype=float
        )
        incoming = sp.csr_matrix(
            (np.ones(m), (dst, np.arange(m))), shape=(graph.num_nodes, m), dtype=float
        )
        for a in (src, dst, rev, und):
            a.setflags(write=False)
        return cls(src, dst, rev, und, src < dst, excl, incoming)


def apply_sparse(mat: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """Compute ``mat @ x`` along axis -2 of ``x`` (leading axes are batch)."""
    x = np.asarray(x)
    if x.ndim == 2:
        return np.asarray(mat @ x)
    lead = x.shape[:-2]
    m, k = x.shape[-2:]
    flat = np.moveaxis(x, -2, 0).reshape(m, -1)
    out = np.asarray(mat @ flat)
    return np.moveaxis(out.reshape((mat.shape[0],) + lead + (k,)), 0, -2)


@dataclass(frozen=True, eq=False)
class PairwiseMRF:
    """Pairwise MRF with strictly positive potentials.

    ``log_unary`` has shape ``(N, K)``. ``log_pairwise`` has shape
    ``(|E|, K, K)`` with entry ``[k, a, b]`` for edge ``graph.edges[k] = (s, t)``
    being ``log phi_st(x_s=label_a, x_t=label_b)``.
    """

    graph: Graph
    domain: Domain
    log_unary: np.ndarray
    log_pairwise: np.ndarray

    def __post_init__(self):
        n, k = self.graph.num_nodes, self.domain.size
        lu = np.asarray(self.log_unary, dtype=float)
        lp = np.asarray(self.log_pairwise, dtype=float)
        if lp.size == 0:
            lp = lp.reshape(0, k, k)
        if lu.shape != (n, k):
            raise StructuralError(f"unary table shape {lu.shape}, expected {(n, k)}")
        if lp.shape != (self.graph.num_edges, k, k):
            raise StructuralError(
                f"pairwise table shape {lp.shape}, expected {(self.graph.num_edges, k, k)}"
            )
        if not (np.all(np.isfinite(lu)) and np.all(np.isfinite(lp))):
            raise DomainError("potentials must be strictly positive and finite")
        object.__setattr__(self, "log_unary", _frozen(lu))
        object.__setattr__(self, "log_pairwise", _frozen(lp))

    @classmethod
    def from_potentials(cls, graph: Graph, domain: Domain, unary, pairwise) -> "PairwiseMRF":
        """Build from linear-scale tables; ``pairwise`` is ordered like ``graph.edges``."""
        unary = np.asarray(unary, dtype=float)
        pairwise = np.asarray(pairwise, dtype=float).reshape(-1, domain.size, domain.size)
        if np.any(unary <= 0) or np.any(pairwise <= 0):
            raise DomainError("potential entries must be > 0")
        with np.errstate(divide="ignore"):
            return cls(graph, domain, np.log(unary), np.log(pairwise))

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    def unary(self, s: int) -> np.ndarray:
        return np.exp(self.log_unary[s])

    def log_pair(self, s: int, t: int) -> np.ndarray:
        """Log table indexed ``[x_s, x_t]``; transposed on reversed lookup."""
        k = self.graph.edge_index.get((min(s, t), max(s, t)))
        if k is None:
            raise StructuralError(f"no edge between {s} and {t}")
        table = self.log_pairwise[k]
        return table if s < t else table.T

    def pairwise(self, s: int, t: int) -> np.ndarray:
        return np.exp(self.log_pair(s, t))

    def directed_log_pairwise(self) -> np.ndarray:
        """Tables per directed edge ``t->s`` indexed ``[x_t, x_s]``."""
        topo = self.graph.topology
        tabs = self.log_pairwise[topo.und]
        return np.where(topo.forward[:, None, None], tabs, np.swapaxes(tabs, -1, -2))

    def with_unary(self, log_unary: np.ndarray) -> "PairwiseMRF":
        return PairwiseMRF(self.graph, self.domain, log_unary, self.log_pairwise)


@dataclass(frozen=True, eq=False)
class IsingModel:
    """``p(x) ∝ exp(-x^T J x - b^T x)`` over ``x in {-1, +1}^N``.

    ``graph`` fixes the edge set; when omitted it is the off-diagonal
    nonzero pattern of ``J``.
    """

    J: np.ndarray
    b: np.ndarray
    graph: Graph | None = field(default=None)

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise StructuralError(f"J must be square, got shape {J.shape}")
        if b.shape != (J.shape[0],):
            raise StructuralError(f"b has length {b.size}, expected {J.shape[0]}")
        if not np.array_equal(J, J.T):
            raise StructuralError("J must be symmetric")
        graph = self.graph
        if graph is None:
            n = J.shape[0]
            iu = np.triu_indices(n, 1)
            nz = J[iu] != 0
            graph = Graph(n, tuple(zip(iu[0][nz].tolist(), iu[1][nz].tolist())))
        elif graph.num_nodes != J.shape[0]:
            raise StructuralError("graph size does not match J")
        else:
            off = J.copy()
            np.fill_diagonal(off, 0.0)
            for s, t in zip(*np.nonzero(np.triu(off, 1))):
                if not graph.has_edge(int(s), int(t)):
                    raise StructuralError(f"J[{s},{t}] nonzero off the edge set")
        object.__setattr__(self, "J", _frozen(J))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "graph", graph)

    @property
    def num_nodes(self) -> int:
        return self.J.shape[0]

    def edge_weights(self) -> np.ndarray:
        """``J_st`` for each edge of ``graph``, in edge order."""
        if not self.graph.edges:
            return np.zeros(0)
        s, t = np.array(self.graph.edges).T
        return self.J[s, t]

    def energy(self, x) -> float:
        """``x^T J x + b^T x`` including the diagonal of ``J``."""
        x = np.asarray(x, dtype=float)
        return float(x @ self.J @ x + self.b @ x)


def ising_to_mrf(model: IsingModel) -> PairwiseMRF:
    """Pairwise form with ``phi_st = exp(-2 J_st x_s x_t)``, ``phi_s = exp(-b_s x_s)``.

    The diagonal of ``J`` contributes the constant ``sum_s J_ss`` for
    binary states and is dropped.
    """
    labels = np.array(BINARY.labels, dtype=float)
    log_unary = -np.outer(model.b, labels)
    outer = np.outer(labels, labels)
    log_pairwise = -2.0 * model.edge_weights()[:, None, None] * outer[None]
    return PairwiseMRF(model.graph, BINARY, log_unary, log_pairwise)


def mrf_log_score(mrf: PairwiseMRF, assignment: Sequence[int]) -> float:
    """Unnormalized log probability of an assignment given as labels."""
    if len(assignment) != mrf.num_nodes:
        raise DomainError(
            f"assignment has length {len(assignment)}, expected {mrf.num_nodes}"
        )
    idx = np.array([mrf.domain.index(v) for v in assignment], dtype=np.intp)
    return float(_log_scores(mrf, idx[None, :])[0])


def _log_scores(mrf: PairwiseMRF, idx: np.ndarray) -> np.ndarray:
    """Scores for a batch of state-index assignments, shape ``(B, N)``."""
    n = mrf.num_nodes
    total = mrf.log_unary[np.arange(n)[None, :], idx].sum(axis=1)
    if mrf.graph.num_edges:
        s, t = np.array(mrf.graph.edges).T
        k = np.arange(mrf.graph.num_edges)
        total = total + mrf.log_pairwise[k[None, :], idx[:, s], idx[:, t]].sum(axis=1)
    return total


# ---------------------------------------------------------------------------
# JSON model files


def model_to_dict(model: IsingModel | PairwiseMRF, provenance: dict | None = None) -> dict:
    if isinstance(model, IsingModel):
        out = {
            "n": model.num_nodes,
            "domain": list(BINARY.labels),
            "edges": [list(e) for e in model.graph.edges],
            "J": [[s, t, float(model.J[s, t])] for s, t in model.graph.edges],
            "b": [float(v) for v in model.b],
        }
    else:
        out = {
            "n": model.num_nodes,
            "domain": list(model.domain.labels),
            "edges": [list(e) for e in model.graph.edges],
            "unary": np.exp(model.log_unary).tolist(),
            "pairwise": np.exp(model.log_pairwise).tolist(),
        }
    if provenance is not None:
        out["provenance"] = provenance
    return out


def _check_edges(pairs: Iterable, n: int, what: str) -> list[tuple[int, int]]:
    seen = set()
    out = []
    for pair in pairs:
        s, t = int(pair[0]), int(pair[1])
        key = (min(s, t), max(s, t))
        if key in seen:
            raise StructuralError(f"duplicate {what} entry for edge {key}")
        seen.add(key)
        out.append((s, t))
    return out


def model_from_dict(data: dict) -> IsingModel | PairwiseMRF:
    """Parse the JSON model format. Ising when ``J`` is present."""
    try:
        n = int(data["n"])
        domain = Domain(tuple(data.get("domain", (-1, 1))))
        edges = _check_edges(data.get("edges", []), n, "edges")
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"malformed model: {exc}") from exc
    graph = Graph(n, tuple(edges))
    if "J" in data:
        if not domain.is_binary:
            raise StructuralError("Ising models require domain [-1, 1]")
        triples = data["J"]
        _check_edges(triples, n, "J")
        J = np.zeros((n, n))
        for s, t, v in triples:
            s, t = int(s), int(t)
            if s != t and not graph.has_edge(s, t):
                raise StructuralError(f"J entry ({s}, {t}) is not an edge")
            J[s, t] = J[t, s] = float(v)
        b = np.asarray(data.get("b", np.zeros(n)), dtype=float)
        return IsingModel(J, b, graph)
    if "unary" not in data:
        raise StructuralError("model needs either 'J'/'b' or 'unary'/'pairwise'")
    unary = np.asarray(data["unary"], dtype=float)
    pairwise = np.asarray(data.get("pairwise", []), dtype=float)
    if pairwise.size == 0:
        pairwise = np.zeros((0, domain.size, domain.size))
    if len(edges) != len(pairwise):
        raise StructuralError("one pairwise table is required per edge")
    # tables follow the file's edge order and orientation
    tables = np.empty((len(edges), domain.size, domain.size))
    for (s, t), tab in zip(edges, pairwise):
        k = graph.edge_index[(min(s, t), max(s, t))]
        tables[k] = tab if s < t else tab.T
    return PairwiseMRF.from_potentials(graph, domain, unary, tables)


def load_model(path) -> IsingModel | PairwiseMRF:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_dict(data)


def dump_model(model, path, provenance: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, provenance), fh, indent=1)
        fh.write("\n")
