"""Divergences between positive (possibly unnormalized) discrete measures."""

from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = ["alpha_divergence", "kl_divergence"]


def _positive_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError(f"shape mismatch: {p.shape} vs {q.shape}")
    if np.any(~(p > 0)) or np.any(~(q > 0)):
        raise DomainError("divergence arguments must be strictly positive")
    return p, q


def kl_divergence(p, q) -> float:
    """``sum p log(p/q) + sum(q - p)``; the correction term handles unnormalized inputs."""
    p, q = _positive_pair(p, q)
    return float(np.sum(p * np.log(p / q)) + np.sum(q - p))


def alpha_divergence(p, q, alpha: float) -> float:
    """Amari alpha-divergence ``D_alpha(p || q)``.

    ``alpha == 1`` gives ``KL(p || q)`` and ``alpha == 0`` gives
    ``KL(q || p)``; every other value uses the closed form directly.
    """
    p, q = _positive_pair(p, q)
    alpha = float(alpha)
    if alpha == 1.0:
        return kl_divergence(p, q)
    if alpha == 0.0:
        return kl_divergence(q, p)
    mixed = np.exp(alpha * np.log(p) + (1.0 - alpha) * np.log(q))
    num = np.sum(alpha * p + (1.0 - alpha) * q - mixed)
    return float(num / (alpha * (1.0 - alpha)))
