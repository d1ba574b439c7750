"""Naive mean field by coordinate descent on the Gibbs free energy."""

from __future__ import annotations

import numpy as np
from scipy.special import softmax

from ..mrf import PairwiseMRF, Topology
from .types import BeliefResult, RunConfig

__all__ = ["mean_field_run", "mean_field_sweep", "mean_field_free_energy", "mean_field_batch"]


def _sweep(log_unary, log_pair, q, topo: Topology, in_edges):
    """One sequential pass over nodes; returns the updated ``q`` and max change."""
    q = q.copy()
    change = np.zeros(q.shape[:-2])
    for s, edges in enumerate(in_edges):
        field = log_unary[..., s, :]
        if len(edges):
            q_src = q[..., topo.src[edges], :]
            field = field + np.einsum("...ek,...ekj->...j", q_src, log_pair[..., edges, :, :])
        new = softmax(field, axis=-1)
        change = np.maximum(change, np.max(np.abs(new - q[..., s, :]), axis=-1))
        q[..., s, :] = new
    return q, change


def _in_edges(topo: Topology, n: int) -> list[np.ndarray]:
    return [np.flatnonzero(topo.dst == s) for s in range(n)]


def mean_field_sweep(mrf: PairwiseMRF, q: np.ndarray) -> np.ndarray:
    """Update every ``q_s`` once, in node order, from its stationarity condition."""
    topo = mrf.graph.topology
    out, _ = _sweep(
        mrf.log_unary, mrf.directed_log_pairwise(), np.asarray(q, float), topo,
        _in_edges(topo, mrf.num_nodes),
    )
    return out


def mean_field_free_energy(mrf: PairwiseMRF, q: np.ndarray) -> float:
    """``sum q log q - sum q log phi_s - sum_edges q_s q_t log phi_st``."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(q > 0, q * np.log(q), 0.0).sum()
    energy = -(q * mrf.log_unary).sum()
    for k, (s, t) in enumerate(mrf.graph.edges):
        energy -= q[s] @ mrf.log_pairwise[k] @ q[t]
    return float(ent + energy)


def mean_field_batch(log_unary, log_pair, topo: Topology, max_iterations=200, tolerance=1e-6):
    """Batched mean field from uniform ``q``; returns ``(q, sweeps, converged)``."""
    log_unary = np.asarray(log_unary, dtype=float)
    batch, (n, k) = log_unary.shape[:-2], log_unary.shape[-2:]
    q = np.full(log_unary.shape, 1.0 / k)
    in_edges = _in_edges(topo, n)
    sweeps = np.zeros(batch, dtype=int)
    converged = np.zeros(batch, dtype=bool)
    active = np.ones(batch, dtype=bool)
    trace = []
    for _ in range(max_iterations):
        new, change = _sweep(log_unary, log_pair, q, topo, in_edges)
        q = np.where(active[..., None, None], new, q)
        sweeps = sweeps + active
        trace.append(np.where(active, change, np.nan))
        done = active & (change < tolerance)
        converged |= done
        active &= ~done
        if not active.any():
            break
    return q, sweeps, converged, np.array(trace)


def mean_field_run(mrf: PairwiseMRF, config: RunConfig | None = None) -> BeliefResult:
    """Sweep until no ``q_s`` moves by more than ``config.tolerance``."""
    config = config or RunConfig()
    q, sweeps, conv, trace = mean_field_batch(
        mrf.log_unary, mrf.directed_log_pairwise(), mrf.graph.topology,
        config.max_iterations, config.tolerance,
    )
    return BeliefResult(
        marginals=q,
        converged=bool(conv),
        iterations_used=int(sweeps),
        residual_trace=tuple(float(r) for r in trace[: int(sweeps)]),
        final_messages=None,
    )
