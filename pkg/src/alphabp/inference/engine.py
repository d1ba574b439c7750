"""Parallel (synchronous) message passing: alpha-BP, damped BP and TRW.

All kernels work on log-domain arrays and accept any number of leading
batch axes, so one call can advance many models that share a graph. The
public step functions wrap them for a single :class:`PairwiseMRF`.

Array conventions (``E2`` directed edges, ``K`` states)::

    log_unary   (..., N, K)
    log_pair    (..., E2, K, K)   indexed [x_t, x_s] for directed edge t->s
    log_msg     (..., E2, K)      message t->s as a function of x_s
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..errors import DegenerateMessageError, ParameterError
from ..mrf import PairwiseMRF, Topology, apply_sparse
from .types import (
    AlphaAssignment,
    BeliefResult,
    EdgeAppearance,
    MessageState,
    RunConfig,
    init_messages,
)

__all__ = [
    "alpha_bp_step",
    "bp_step",
    "damped_bp_step",
    "trw_step",
    "node_beliefs",
    "trw_beliefs",
    "run_alpha_bp",
    "run_damped_bp",
    "run_trw",
    "message_trajectory",
    "propagate",
]

MESSAGE_FLOOR = 1e-300
DEGENERATE_BELOW = 1e-100
_LOG_FLOOR = np.log(MESSAGE_FLOOR)
_LOG_DEGENERATE = np.log(DEGENERATE_BELOW)


# ---------------------------------------------------------------------------
# kernels


def alpha_raw(log_unary, log_pair, log_msg, alpha, topo: Topology):
    """Unnormalized log of the alpha-BP update for every directed edge."""
    a = np.asarray(alpha, dtype=float)[..., None]
    excl = apply_sparse(topo.excl, log_msg)
    cavity = log_unary[..., topo.src, :] + excl + (1.0 - a) * log_msg[..., topo.rev, :]
    inner = a[..., None] * log_pair + cavity[..., :, None]
    return (1.0 - a) * log_msg + logsumexp(inner, axis=-2)


def damped_raw(log_unary, log_pair, log_msg, gamma, topo: Topology):
    bp = alpha_raw(log_unary, log_pair, log_msg, np.ones(log_msg.shape[-2]), topo)
    return gamma * log_msg + (1.0 - gamma) * bp


def trw_raw(log_unary, log_pair, log_msg, mu, topo: Topology):
    m = np.asarray(mu, dtype=float)[..., None]
    excl = apply_sparse(topo.excl, m * log_msg)
    cavity = log_unary[..., topo.src, :] + excl - (1.0 - m) * log_msg[..., topo.rev, :]
    inner = log_pair / m[..., None] + cavity[..., :, None]
    return logsumexp(inner, axis=-2)


def normalize_log(raw, strict: bool = True):
    """Shift, clamp at the message floor and renormalize along the last axis."""
    if raw.shape[-1] == 0 or raw.size == 0:
        return raw
    shifted = raw - np.max(raw, axis=-1, keepdims=True)
    shifted = np.maximum(shifted, _LOG_FLOOR)
    out = shifted - logsumexp(shifted, axis=-1, keepdims=True)
    if strict and np.any(out < _LOG_DEGENERATE):
        raise DegenerateMessageError(
            f"message entry below {DEGENERATE_BELOW:g} after normalization"
        )
    return out


def log_beliefs(log_unary, log_msg, topo: Topology, weights=None):
    """``log q_s ∝ log phi_s + sum_w w_ws log m_ws``, normalized per node."""
    msgs = log_msg if weights is None else np.asarray(weights)[..., None] * log_msg
    raw = log_unary + apply_sparse(topo.incoming, msgs)
    return normalize_log(raw, strict=False)


# ---------------------------------------------------------------------------
# single-model steps


def _log_state(state: MessageState) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(state.values)


def _wrap(mrf: PairwiseMRF, raw) -> MessageState:
    return MessageState(mrf.graph, np.exp(normalize_log(raw)))


def alpha_bp_step(mrf: PairwiseMRF, alphas: AlphaAssignment | float, state: MessageState) -> MessageState:
    """One synchronous alpha-BP update of every directed edge."""
    if mrf.graph.num_edges == 0:
        return state
    if not isinstance(alphas, AlphaAssignment):
        alphas = AlphaAssignment.broadcast(alphas)
    raw = alpha_raw(
        mrf.log_unary,
        mrf.directed_log_pairwise(),
        _log_state(state),
        alphas.directed_values(mrf.graph),
        mrf.graph.topology,
    )
    return _wrap(mrf, raw)


def bp_step(mrf: PairwiseMRF, state: MessageState) -> MessageState:
    """Standard sum-product update, written out edge by edge in linear space.

    Kept deliberately separate from the vectorized kernels so it can serve
    as a reference for them.
    """
    graph = mrf.graph
    out = np.empty_like(state.values)
    for k, (t, s) in enumerate(graph.directed_edges):
        prod = mrf.unary(t).copy()
        for w in graph.neighbors(t):
            if w != s:
                prod = prod * state[(w, t)]
        new = mrf.pairwise(t, s).T @ prod
        new = np.maximum(new / new.max(), MESSAGE_FLOOR)
        out[k] = new / new.sum()
    if np.any(out < DEGENERATE_BELOW):
        raise DegenerateMessageError(f"message entry below {DEGENERATE_BELOW:g}")
    return MessageState(graph, out)


def damped_bp_step(mrf: PairwiseMRF, gamma: float, state: MessageState) -> MessageState:
    """``m_new ∝ m_old**gamma * (BP update)**(1 - gamma)``."""
    if not 0 < gamma < 1:
        raise ParameterError(f"damping gamma must lie in (0, 1), got {gamma}")
    if mrf.graph.num_edges == 0:
        return state
    raw = damped_raw(
        mrf.log_unary, mrf.directed_log_pairwise(), _log_state(state), gamma, mrf.graph.topology
    )
    return _wrap(mrf, raw)


def _mu_values(mrf: PairwiseMRF, mu) -> np.ndarray:
    if isinstance(mu, EdgeAppearance):
        vals = mu.directed_values()
    else:
        vals = np.broadcast_to(np.asarray(mu, dtype=float), (mrf.graph.num_edges,))
        vals = vals[mrf.graph.topology.und]
    if np.any(vals <= 0) or np.any(vals > 1 + 1e-12):
        raise ParameterError("edge appearance probabilities must lie in (0, 1]")
    return vals


def trw_step(mrf: PairwiseMRF, mu: EdgeAppearance | float, state: MessageState) -> MessageState:
    """Tree-reweighted sum-product update with edge weights ``mu``."""
    if mrf.graph.num_edges == 0:
        return state
    raw = trw_raw(
        mrf.log_unary,
        mrf.directed_log_pairwise(),
        _log_state(state),
        _mu_values(mrf, mu),
        mrf.graph.topology,
    )
    return _wrap(mrf, raw)


def node_beliefs(mrf: PairwiseMRF, state: MessageState) -> np.ndarray:
    """Per-node beliefs ``q_s ∝ phi_s prod_w m_ws``, shape ``(N, K)``."""
    return np.exp(log_beliefs(mrf.log_unary, _log_state(state), mrf.graph.topology))


def trw_beliefs(mrf: PairwiseMRF, mu: EdgeAppearance | float, state: MessageState) -> np.ndarray:
    """TRW pseudo-marginals ``q_s ∝ phi_s prod_w m_ws**mu_ws``."""
    weights = _mu_values(mrf, mu)
    return np.exp(log_beliefs(mrf.log_unary, _log_state(state), mrf.graph.topology, weights))


# ---------------------------------------------------------------------------
# iteration driver


def propagate(
    kind: str,
    log_unary: np.ndarray,
    log_pair: np.ndarray,
    topo: Topology,
    *,
    param=None,
    anneal=None,
    max_iterations: int = 200,
    tolerance: float = 1e-6,
    log_msg0: np.ndarray | None = None,
    strict: bool = True,
):
    """Iterate a kernel on a batch of models sharing ``topo``.

    ``kind`` is ``"alpha"`` (``param`` = per-directed-edge alpha),
    ``"damped"`` (``param`` = gamma) or ``"trw"`` (``param`` = per-directed-edge
    mu). Models whose max-norm message change drops below ``tolerance`` are
    frozen while the rest continue, so each batch member gets exactly the
    result a standalone run would give.

    Returns ``(log_msg, iterations, converged, residuals)``; ``residuals`` has
    shape ``(iterations_run, B)`` with NaN after a member has stopped.
    """
    log_unary = np.asarray(log_unary, dtype=float)
    batch = log_unary.shape[:-2]
    e2, k = topo.src.shape[0], log_unary.shape[-1]
    if log_msg0 is None:
        log_msg = np.full(batch + (e2, k), -np.log(k))
    else:
        log_msg = np.array(log_msg0, dtype=float)
    iterations = np.zeros(batch, dtype=int)
    converged = np.zeros(batch, dtype=bool)
    residuals: list[np.ndarray] = []
    if e2 == 0:
        converged[...] = True
        return log_msg, iterations, converged, np.zeros((0,) + batch)

    active = np.ones(batch, dtype=bool)
    last_anneal = anneal.num_iterations - 1 if anneal is not None else 0
    for n in range(max_iterations):
        if kind == "alpha":
            alpha = param if anneal is None else np.full(e2, anneal.alpha_at(n))
            raw = alpha_raw(log_unary, log_pair, log_msg, alpha, topo)
        elif kind == "damped":
            raw = damped_raw(log_unary, log_pair, log_msg, param, topo)
        elif kind == "trw":
            raw = trw_raw(log_unary, log_pair, log_msg, param, topo)
        else:
            raise ParameterError(f"unknown message-passing kind {kind!r}")
        new = normalize_log(raw, strict=strict)
        change = np.max(np.abs(np.exp(new) - np.exp(log_msg)), axis=(-2, -1))
        log_msg = np.where(active[..., None, None], new, log_msg)
        iterations = iterations + active
        residuals.append(np.where(active, change, np.nan))
        done = active & (change < tolerance) & (n >= last_anneal)
        converged |= done
        active &= ~done
        if not active.any():
            break
    return log_msg, iterations, converged, np.array(residuals)


def _run(mrf: PairwiseMRF, kind: str, param, config: RunConfig, weights=None) -> BeliefResult:
    topo = mrf.graph.topology
    log0 = None
    if config.seed is not None:
        log0 = _log_state(init_messages(mrf, seed=config.seed))
    log_msg, iters, conv, res = propagate(
        kind,
        mrf.log_unary,
        mrf.directed_log_pairwise(),
        topo,
        param=param,
        anneal=config.anneal if kind == "alpha" else None,
        max_iterations=config.max_iterations,
        tolerance=config.tolerance,
        log_msg0=log0,
    )
    marg = np.exp(log_beliefs(mrf.log_unary, log_msg, topo, weights))
    return BeliefResult(
        marginals=marg,
        converged=bool(conv),
        iterations_used=int(iters),
        residual_trace=tuple(float(r) for r in res[: int(iters)]),
        final_messages=MessageState(mrf.graph, np.exp(log_msg)),
    )


def run_alpha_bp(
    mrf: PairwiseMRF, alphas: AlphaAssignment | float = 1.0, config: RunConfig | None = None
) -> BeliefResult:
    """Iterate alpha-BP until the max-norm message change falls below tolerance.

    With ``config.damping`` set, the damped update is used instead (only
    meaningful for alpha = 1). With ``config.anneal`` set, the broadcast
    alpha follows the schedule and ``alphas`` is ignored; the run is not
    allowed to stop before the schedule has reached its final value.
    """
    config = config or RunConfig()
    if not isinstance(alphas, AlphaAssignment):
        alphas = AlphaAssignment.broadcast(alphas)
    if config.damping is not None:
        return _run(mrf, "damped", config.damping, config)
    return _run(mrf, "alpha", alphas.directed_values(mrf.graph), config)


def run_damped_bp(mrf: PairwiseMRF, gamma: float, config: RunConfig | None = None) -> BeliefResult:
    if not 0 < gamma < 1:
        raise ParameterError(f"damping gamma must lie in (0, 1), got {gamma}")
    return _run(mrf, "damped", gamma, config or RunConfig())


def run_trw(mrf: PairwiseMRF, mu: EdgeAppearance | float | None = None, config: RunConfig | None = None) -> BeliefResult:
    """TRW-BP; ``mu`` defaults to the spanning-tree edge appearance probabilities."""
    if mu is None:
        from .spanning import edge_appearance_probabilities

        mu = edge_appearance_probabilities(mrf.graph)
    vals = _mu_values(mrf, mu)
    return _run(mrf, "trw", vals, config or RunConfig(), weights=vals)


def message_trajectory(
    mrf: PairwiseMRF, alphas: AlphaAssignment | float, iterations: int
) -> np.ndarray:
    """Messages after each of ``0..iterations`` alpha-BP steps from uniform start.

    Shape ``(iterations + 1, E2, K)``; no early stopping.
    """
    if not isinstance(alphas, AlphaAssignment):
        alphas = AlphaAssignment.broadcast(alphas)
    topo = mrf.graph.topology
    alpha = alphas.directed_values(mrf.graph)
    log_pair = mrf.directed_log_pairwise()
    k = mrf.domain.size
    log_msg = np.full((topo.src.shape[0], k), -np.log(k))
    out = [np.exp(log_msg)]
    for _ in range(iterations):
        if log_msg.size:
            log_msg = normalize_log(alpha_raw(mrf.log_unary, log_pair, log_msg, alpha, topo))
        out.append(np.exp(log_msg))
    return np.array(out)
