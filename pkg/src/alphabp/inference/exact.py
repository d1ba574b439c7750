"""Brute-force oracles over all assignments."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..errors import CapacityError
from ..mrf import PairwiseMRF, _log_scores

__all__ = ["exact_marginals", "exact_map", "map_decision", "MAX_STATES", "iter_assignments"]

MAX_STATES = 2**24
_CHUNK = 2**16


def _guard(mrf: PairwiseMRF) -> int:
    total = mrf.domain.size ** mrf.num_nodes
    if total > MAX_STATES:
        raise CapacityError(
            f"{total} assignments exceed the enumeration limit of {MAX_STATES}"
        )
    return total


def iter_assignments(num_nodes: int, k: int, chunk: int = _CHUNK):
    """Yield ``(start, idx)`` blocks of state-index assignments in lexicographic order."""
    total = k**num_nodes
    powers = k ** np.arange(num_nodes - 1, -1, -1)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        yield start, (codes[:, None] // powers[None, :]) % k


def exact_marginals(mrf: PairwiseMRF) -> np.ndarray:
    """Exact node marginals by enumeration, shape ``(N, K)``."""
    _guard(mrf)
    n, k = mrf.num_nodes, mrf.domain.size
    log_z = -np.inf
    log_marg = np.full((n, k), -np.inf)
    for _, idx in iter_assignments(n, k):
        scores = _log_scores(mrf, idx)
        log_z = np.logaddexp(log_z, logsumexp(scores))
        for v in range(k):
            mask = idx == v
            masked = np.where(mask, scores[:, None], -np.inf)
            log_marg[:, v] = np.logaddexp(log_marg[:, v], logsumexp(masked, axis=0))
    return np.exp(log_marg - log_z)


def exact_map(mrf: PairwiseMRF) -> np.ndarray:
    """Most probable assignment as labels; ties go to the lexicographically smallest."""
    _guard(mrf)
    n, k = mrf.num_nodes, mrf.domain.size
    best_score, best = -np.inf, None
    for _, idx in iter_assignments(n, k):
        scores = _log_scores(mrf, idx)
        j = int(np.argmax(scores))
        if scores[j] > best_score:
            best_score, best = scores[j], idx[j]
    labels = np.array(mrf.domain.labels)
    return labels[best]


def map_decision(beliefs, labels=(-1, 1)) -> np.ndarray:
    """Per-node argmax of beliefs; the lowest state index wins ties."""
    beliefs = np.asarray(beliefs)
    return np.asarray(labels)[np.argmax(beliefs, axis=-1)]
