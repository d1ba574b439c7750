"""alpha-belief propagation for pairwise MRFs with spectral convergence certificates."""

from .divergence import alpha_divergence, kl_divergence
from .mrf import BINARY, Domain, Graph, IsingModel, PairwiseMRF, ising_to_mrf, mrf_log_score

__version__ = "0.1.0"

__all__ = [
    "BINARY",
    "Domain",
    "Graph",
    "IsingModel",
    "PairwiseMRF",
    "alpha_divergence",
    "ising_to_mrf",
    "kl_divergence",
    "mrf_log_score",
]
