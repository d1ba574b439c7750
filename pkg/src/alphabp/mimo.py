"""MIMO symbol detection with alpha-BP and the usual baselines.

Model: ``y = H x + e`` with ``x in {-1, +1}^N``, ``e ~ N(0, sigma_w^2 I)``.
Channels have i.i.d. N(0, 1) entries and are redrawn for every trial.
The SNR axis is ``10 log10(N / sigma_w^2)``.

Detectors run batched over trials. All of them see the same
``(H, x, y)`` in a given trial, so SER differences are paired.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError, NumericalError, ParameterError, StructuralError
from .inference.binary import binary_belief_logits, mean_field_binary, propagate_binary
from .inference.spanning import edge_appearance_probabilities
from .inference.types import RunConfig
from .mrf import BINARY, Graph, PairwiseMRF
from .randgen import make_rng

__all__ = [
    "LinearModel",
    "MmseResult",
    "SerPoint",
    "Algorithm",
    "parse_algorithm",
    "mimo_posterior_mrf",
    "mmse_estimate",
    "mmse_prior_beliefs",
    "augment_with_prior",
    "noise_std",
    "draw_trials",
    "detect",
    "ser_experiment",
    "ser_rows_to_csv",
]

_MIMO_STREAM = 0x4D
_X = np.array([-1.0, 1.0])
MAX_MAP_NODES = 20
_FIXED_CHANNEL = 2**63  # stream id outside the per-trial range


@dataclass(frozen=True, eq=False)
class LinearModel:
    H: np.ndarray
    sigma_w: float

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.ndim != 2 or not np.all(np.isfinite(H)):
            raise StructuralError("H must be a finite matrix")
        if not self.sigma_w > 0:
            raise ParameterError("sigma_w must be > 0")
        object.__setattr__(self, "H", H)


@dataclass(frozen=True, eq=False)
class MmseResult:
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    decision: np.ndarray


@dataclass(frozen=True)
class SerPoint:
    snr_db: float
    algorithm: str
    alpha: float | None
    trials: int
    symbol_errors: int
    ser: float


def noise_std(n: int, snr_db: float) -> float:
    return float(np.sqrt(n / 10.0 ** (snr_db / 10.0)))


def _check_y(model: LinearModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (model.H.shape[0],):
        raise StructuralError(f"y has length {y.size}, expected {model.H.shape[0]}")
    return y


def _posterior_tables(H, y, sigma_w):
    """Batched ``(log_unary, S)``: unary log-potentials at x = -1, +1 and ``H^T H``."""
    S = np.swapaxes(H, -1, -2) @ H
    hy = np.einsum("...ki,...k->...i", H, y)
    diag = np.diagonal(S, axis1=-2, axis2=-1)
    var = sigma_w**2
    log_unary = -diag[..., None] * (_X**2) / (2 * var) + hy[..., None] * _X / var
    return log_unary, S


def mimo_posterior_mrf(model: LinearModel, y) -> PairwiseMRF:
    """Pairwise MRF of ``p(x | y)``; edges follow the off-diagonal support of ``H^T H``."""
    if model.H.shape[0] != model.H.shape[1]:
        raise StructuralError("the channel must be square")
    y = _check_y(model, y)
    log_unary, S = _posterior_tables(model.H, y, model.sigma_w)
    n = S.shape[0]
    iu, ju = np.triu_indices(n, 1)
    nz = S[iu, ju] != 0
    graph = Graph(n, tuple(zip(iu[nz].tolist(), ju[nz].tolist())))
    weights = S[iu[nz], ju[nz]]
    log_pair = -np.outer(_X, _X)[None] * weights[:, None, None] / model.sigma_w**2
    return PairwiseMRF(graph, BINARY, log_unary, log_pair)


def mmse_estimate(model: LinearModel, y) -> MmseResult:
    """Gaussian-posterior mean and the covariance-like matrix used for the prior.

    ``sigma_hat = (H^T H + sigma_w^2 I)^{-1} sigma_w``, scaled by ``sigma_w``
    (not its square) as in the detector this reproduces.
    """
    y = _check_y(model, y)
    mu, sig = _mmse_batch(model.H, y, model.sigma_w)
    return MmseResult(mu, sig, np.where(mu > 0, 1, -1))


def _mmse_batch(H, y, sigma_w):
    n = H.shape[-1]
    A = np.swapaxes(H, -1, -2) @ H + sigma_w**2 * np.eye(n)
    rhs = np.einsum("...ki,...k->...i", H, y)
    mu = np.linalg.solve(A, rhs[..., None])[..., 0]
    sigma_hat = np.linalg.inv(A) * sigma_w
    return mu, sigma_hat


def mmse_prior_beliefs(result: MmseResult) -> np.ndarray:
    """``p_i(x) ∝ exp(-(x - mu_i)^2 / (2 Sigma_ii))`` at ``x = -1, +1``."""
    return np.exp(_mmse_log_prior(result.mu_hat, np.diagonal(result.sigma_hat, axis1=-2, axis2=-1)))


def _mmse_log_prior(mu, var):
    if np.any(~(var > 0)):
        raise NumericalError("MMSE covariance diagonal must be positive")
    logp = -((_X - mu[..., None]) ** 2) / (2.0 * var[..., None])
    logp -= np.logaddexp(logp[..., 0], logp[..., 1])[..., None]
    return logp


def augment_with_prior(mrf: PairwiseMRF, priors) -> PairwiseMRF:
    """Attach one extra prior factor per node by folding it into the unary table."""
    priors = np.asarray(priors, dtype=float)
    if priors.shape != mrf.log_unary.shape:
        raise StructuralError(f"priors shape {priors.shape}, expected {mrf.log_unary.shape}")
    if np.any(~(priors > 0)):
        raise DomainError("prior factors must be strictly positive")
    return mrf.with_unary(mrf.log_unary + np.log(priors))


# ---------------------------------------------------------------------------
# detectors


@dataclass(frozen=True)
class Algorithm:
    name: str
    param: float | None = None

    @property
    def label(self) -> str:
        return self.name if self.param is None else f"{self.name}:{self.param:g}"

    @property
    def alpha(self) -> float | None:
        if self.name in ("alpha-bp", "alpha-bp-mmse"):
            return self.param
        if self.name == "bp":
            return 1.0
        return None


_PARAMETRIC = {"alpha-bp", "alpha-bp-mmse", "damped"}
_PLAIN = {"map", "mmse", "bp", "mf", "trw"}


def parse_algorithm(text: str) -> Algorithm:
    """Parse identifiers such as ``bp``, ``alpha-bp:0.5``, ``damped:0.7``."""
    name, _, arg = text.strip().partition(":")
    if name in _PLAIN and not arg:
        return Algorithm(name)
    if name in _PARAMETRIC and arg:
        try:
            value = float(arg)
        except ValueError:
            raise ParameterError(f"bad parameter in algorithm {text!r}") from None
        if name == "damped" and not 0 < value < 1:
            raise ParameterError("damping gamma must lie in (0, 1)")
        return Algorithm(name, value)
    raise ParameterError(f"unknown algorithm identifier {text!r}")


def _complete_graph(n: int) -> Graph:
    iu, ju = np.triu_indices(n, 1)
    return Graph(n, tuple(zip(iu.tolist(), ju.tolist())))


def _map_batch(H, y):
    n = H.shape[-1]
    if n > MAX_MAP_NODES:
        raise CapacityError(f"exhaustive MAP over 2^{n} assignments is disabled above N={MAX_MAP_NODES}")
    codes = np.arange(2**n)
    cand = 2.0 * ((codes[:, None] >> np.arange(n - 1, -1, -1)) & 1) - 1.0
    best = np.empty(H.shape[:-2] + (n,))
    best_cost = np.full(H.shape[:-2], np.inf)
    for start in range(0, cand.shape[0], 1024):
        block = cand[start : start + 1024]
        resid = np.einsum("...ij,cj->...ci", H, block) - y[..., None, :]
        cost = np.sum(resid**2, axis=-1)
        j = np.argmin(cost, axis=-1)
        c = np.take_along_axis(cost, j[..., None], axis=-1)[..., 0]
        better = c < best_cost
        best = np.where(better[..., None], block[j], best)
        best_cost = np.where(better, c, best_cost)
    return best.astype(int)


def detect(algo: Algorithm, H, y, sigma_w: float, config: RunConfig | None = None) -> np.ndarray:
    """Symbol decisions for a batch of channels ``H (B, N, N)`` and ``y (B, N)``.

    Message-passing detectors run in log-ratio coordinates (the posterior
    is a binary model with symmetric potentials); ties decode to -1.
    """
    config = config or RunConfig()
    H = np.asarray(H, dtype=float)
    y = np.asarray(y, dtype=float)
    if algo.name == "map":
        return _map_batch(H, y)
    if algo.name == "mmse":
        mu, _ = _mmse_batch(H, y, sigma_w)
        return np.where(mu > 0, 1, -1)

    n = H.shape[-1]
    var = sigma_w**2
    S = np.swapaxes(H, -1, -2) @ H
    theta_node = np.einsum("...ki,...k->...i", H, y) / var
    theta_pair = -S / var
    opts = dict(max_iterations=config.max_iterations, tolerance=config.tolerance)
    if algo.name == "mf":
        dense = theta_pair * (1.0 - np.eye(n))
        q, *_ = mean_field_binary(theta_node, dense, **opts)
        return np.where(q > 0.5, 1, -1)

    graph = _complete_graph(n)
    topo = graph.topology
    theta_dir = theta_pair[..., topo.src, topo.dst]
    weights = None
    if algo.name in ("bp", "alpha-bp", "alpha-bp-mmse"):
        alpha = 1.0 if algo.name == "bp" else algo.param
        if algo.name == "alpha-bp-mmse":
            mu, sig = _mmse_batch(H, y, sigma_w)
            diag = np.diagonal(sig, axis1=-2, axis2=-1)
            _mmse_log_prior(mu, diag)  # validates the diagonal
            theta_node = theta_node + mu / diag
        z, *_ = propagate_binary("alpha", theta_node, theta_dir, topo, param=np.full(topo.src.size, alpha), **opts)
    elif algo.name == "damped":
        z, *_ = propagate_binary("damped", theta_node, theta_dir, topo, param=algo.param, **opts)
    elif algo.name == "trw":
        weights = edge_appearance_probabilities(graph).directed_values()
        z, *_ = propagate_binary("trw", theta_node, theta_dir, topo, param=weights, **opts)
    else:
        raise ParameterError(f"unknown algorithm {algo.name!r}")
    logits = binary_belief_logits(theta_node, z, topo, weights)
    return np.where(logits > 0, 1, -1)


def draw_trials(n: int, trials: int, seed: int, start: int = 0):
    """Per-trial ``(H, x, e0)`` from independent sub-streams ``(seed, trial)``.

    ``e0`` is standard normal; the noise at a given SNR is ``sigma_w * e0``,
    so one trial keeps its channel and symbols across the whole SNR grid.
    """
    H = np.empty((trials, n, n))
    x = np.empty((trials, n), dtype=int)
    e0 = np.empty((trials, n))
    for k in range(trials):
        rng = make_rng(seed, _MIMO_STREAM, start + k)
        H[k] = rng.standard_normal((n, n))
        x[k] = 2 * rng.integers(0, 2, size=n) - 1
        e0[k] = rng.standard_normal(n)
    return H, x, e0


def ser_experiment(
    n: int,
    algorithms,
    snr_grid,
    trials: int,
    seed: int = 0,
    config: RunConfig | None = None,
    chunk: int = 5000,
    return_errors: bool = False,
    fresh_channel: bool = True,
):
    """Monte Carlo symbol error rates.

    Rows are ordered by SNR, then by the order of ``algorithms``. With
    ``return_errors`` the per-trial error counts, shaped
    ``(len(snr_grid), len(algorithms), trials)``, are returned as well.
    ``fresh_channel=False`` keeps one channel draw for every trial.
    """
    algos = [a if isinstance(a, Algorithm) else parse_algorithm(a) for a in algorithms]
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if any(a.name == "map" for a in algos) and n > MAX_MAP_NODES:
        raise CapacityError(f"MAP detection is limited to N <= {MAX_MAP_NODES}")
    snr_grid = [float(s) for s in snr_grid]
    errors = np.zeros((len(snr_grid), len(algos), trials), dtype=int)
    for start in range(0, trials, chunk):
        m = min(chunk, trials - start)
        H, x, e0 = draw_trials(n, m, seed, start)
        if not fresh_channel:
            H[:] = make_rng(seed, _MIMO_STREAM, _FIXED_CHANNEL).standard_normal((n, n))
        for i, snr in enumerate(snr_grid):
            sw = noise_std(n, snr)
            y = np.einsum("bij,bj->bi", H, x) + sw * e0
            for j, algo in enumerate(algos):
                dec = detect(algo, H, y, sw, config)
                errors[i, j, start : start + m] = np.sum(dec != x, axis=-1)
    points = []
    for i, snr in enumerate(snr_grid):
        for j, algo in enumerate(algos):
            total = int(errors[i, j].sum())
            points.append(SerPoint(snr, algo.label, algo.alpha, trials, total, total / (trials * n)))
    return (points, errors) if return_errors else points


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


SER_COLUMNS = ("snr_db", "algorithm", "alpha", "trials", "symbol_errors", "ser")


def ser_rows_to_csv(points) -> str:
    buf = io.StringIO()
    buf.write("# schema=1\n")
    buf.write("# snr_db = 10*log10(N/sigma_w^2); H entries i.i.d. N(0,1), redrawn per trial\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SER_COLUMNS)
    for p in points:
        w.writerow([_fmt(p.snr_db), p.algorithm, _fmt(p.alpha), p.trials, p.symbol_errors, _fmt(p.ser)])
    return buf.getvalue()
