"""Spectral convergence certificates for alpha-BP on binary symmetric models.

For binary states the messages reduce to log-ratios
``z_ts = log m_ts(+1) / m_ts(-1)``. One synchronous alpha-BP step acts on
them as

    F_ts(z) = (1 - a_ts) z_ts + H(Delta_ts(z); 2 a_ts theta_ts)
    Delta_ts(z) = 2 theta_t + (1 - a_ts) z_st + sum_{w in N(t)\\s} z_wt

and the nonnegative matrix ``M`` over directed edges bounds how
differences between iterates propagate. ``lambda_max(M) < 1`` makes the
map a contraction in l2, and either induced norm below one does the same
in l1 / l-infinity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NumericalError, StructuralError
from .inference.binary import H
from .inference.types import AlphaAssignment, MessageState
from .mrf import Graph, IsingModel, PairwiseMRF, apply_sparse

__all__ = [
    "ThetaParams",
    "ConvergenceMatrix",
    "Certificate",
    "ContractionReport",
    "theta_from_ising",
    "theta_from_mrf",
    "build_m_matrix",
    "largest_singular_value",
    "certify",
    "messages_to_logratio",
    "logratio_to_messages",
    "z_update",
    "z_trajectory",
    "contraction_check",
    "H",
    "G",
]


@dataclass(frozen=True, eq=False)
class ThetaParams:
    """``phi_ts = exp(theta_edge * x_t x_s)``, ``phi_s ∝ exp(theta_node * x_s)``."""

    graph: Graph
    theta_edge: np.ndarray  # per undirected edge, graph order
    theta_node: np.ndarray  # per node

    def __post_init__(self):
        te = np.array(self.theta_edge, dtype=float).reshape(-1)
        tn = np.array(self.theta_node, dtype=float).reshape(-1)
        if te.shape != (self.graph.num_edges,) or tn.shape != (self.graph.num_nodes,):
            raise StructuralError("theta shapes do not match the graph")
        object.__setattr__(self, "theta_edge", te)
        object.__setattr__(self, "theta_node", tn)


def theta_from_ising(model: IsingModel) -> ThetaParams:
    """``theta_ts = -2 J_ts`` and ``theta_s = -b_s``; the diagonal of J is dropped."""
    return ThetaParams(model.graph, -2.0 * model.edge_weights(), -model.b)


def theta_from_mrf(mrf: PairwiseMRF, atol: float = 1e-9) -> ThetaParams:
    """Recover theta from a binary MRF whose potentials have the symmetric form."""
    if not mrf.domain.is_binary:
        raise StructuralError("certificates are defined for the binary domain only")
    lp = mrf.log_pairwise
    te = (lp[:, 1, 1] - lp[:, 0, 1]) / 2.0 if len(lp) else np.zeros(0)
    if len(lp):
        sym = np.stack([lp[:, 0, 0] - lp[:, 1, 1], lp[:, 0, 1] - lp[:, 1, 0]])
        if np.max(np.abs(sym)) > atol:
            raise StructuralError("pairwise potentials are not of the form exp(theta x_s x_t)")
    tn = (mrf.log_unary[:, 1] - mrf.log_unary[:, 0]) / 2.0
    return ThetaParams(mrf.graph, te, tn)


@dataclass(frozen=True, eq=False)
class ConvergenceMatrix:
    graph: Graph
    matrix: np.ndarray

    @property
    def index(self) -> dict[tuple[int, int], int]:
        return self.graph.directed_index


def _directed(theta: ThetaParams, alphas: AlphaAssignment | float) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(alphas, AlphaAssignment):
        alphas = AlphaAssignment.broadcast(alphas)
    und = theta.graph.topology.und
    return alphas.directed_values(theta.graph), theta.theta_edge[und]


def build_m_matrix(theta: ThetaParams, alphas: AlphaAssignment | float, graph: Graph | None = None) -> ConvergenceMatrix:
    """Dense ``|E2| x |E2|`` matrix; rows and columns follow ``graph.directed_edges``."""
    graph = graph or theta.graph
    if graph != theta.graph:
        raise StructuralError("theta was built for a different graph")
    topo = graph.topology
    a, th = _directed(theta, alphas)
    m = topo.src.shape[0]
    one_minus = np.abs(1.0 - a)
    tanh_term = np.tanh(np.abs(a * th))
    M = np.zeros((m, m))
    rows = np.arange(m)
    M[rows, rows] = one_minus
    M[rows, topo.rev] = one_minus * tanh_term
    excl = topo.excl.tocoo()
    M[excl.row, excl.col] = tanh_term[excl.row]
    return ConvergenceMatrix(graph, M)


def largest_singular_value(m, tol: float = 1e-10, max_iterations: int = 10_000) -> float:
    """Largest singular value by power iteration on ``M^T M``.

    Starts from the normalized all-ones vector and stops when the
    eigenvalue estimate changes by less than ``tol`` relative.
    """
    M = m.matrix if isinstance(m, ConvergenceMatrix) else np.asarray(m, dtype=float)
    if M.size == 0:
        return 0.0
    if not np.all(np.isfinite(M)):
        raise NumericalError("matrix has non-finite entries")
    v = np.ones(M.shape[1]) / np.sqrt(M.shape[1])
    est = 0.0
    for _ in range(max_iterations):
        w = M.T @ (M @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        new_est = float(v @ w)
        v = w / nrm
        if abs(new_est - est) <= tol * abs(new_est):
            return float(np.sqrt(max(new_est, 0.0)))
        est = new_est
    raise NumericalError(
        f"power iteration did not converge in {max_iterations} iterations", iterate=np.sqrt(est)
    )


DENSE_CERTIFY_MAX = 1024


@dataclass(frozen=True)
class Certificate:
    lambda_star: float
    l1_norm: float
    linf_norm: float
    theorem1_holds: bool
    corollary_l1_holds: bool
    corollary_linf_holds: bool

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "l1": self.l1_norm,
            "linf": self.linf_norm,
            "theorem1": self.theorem1_holds,
            "corollary_l1": self.corollary_l1_holds,
            "corollary_linf": self.corollary_linf_holds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def certify(theta: ThetaParams, alphas: AlphaAssignment | float, graph: Graph | None = None) -> Certificate:
    """Evaluate the singular-value condition and both induced-norm conditions.

    The two norms are computed from their closed forms (max column sum and
    max row sum of ``M`` written out per directed edge), not from the
    matrix itself. ``lambda*`` comes from a dense SVD up to
    ``DENSE_CERTIFY_MAX`` directed edges. Power iteration stops early on
    clustered spectra and under-reports ``lambda*``, which could certify a
    model that should fail. Larger matrices use power iteration, with the
    dense SVD as fallback when it does not converge.
    """
    graph = graph or theta.graph
    cm = build_m_matrix(theta, alphas, graph)
    if cm.matrix.shape[0] <= DENSE_CERTIFY_MAX:
        lam = float(np.linalg.norm(cm.matrix, 2)) if cm.matrix.size else 0.0
    else:
        try:
            lam = largest_singular_value(cm)
        except NumericalError:
            lam = float(np.linalg.norm(cm.matrix, 2))
    topo = graph.topology
    a, th = _directed(theta, alphas)
    one_minus = np.abs(1.0 - a)
    tanh_term = np.tanh(np.abs(a * th))
    if len(a):
        # column u->v: |1-a_uv| + |1-a_vu| tanh|a_vu th_vu| + sum_{w in N(v)\u} tanh|a_vw th_vw|
        out_sum = np.zeros(graph.num_nodes)
        np.add.at(out_sum, topo.src, tanh_term)
        rev = topo.rev
        cols = one_minus + one_minus[rev] * tanh_term[rev] + out_sum[topo.dst] - tanh_term[rev]
        deg = np.array([graph.degree(t) for t in topo.src])
        rows = one_minus * (1.0 + tanh_term) + (deg - 1) * tanh_term
        l1, linf = float(cols.max()), float(rows.max())
    else:
        l1 = linf = 0.0
    return Certificate(lam, l1, linf, lam < 1.0, l1 < 1.0, linf < 1.0)


# ---------------------------------------------------------------------------
# log-ratio dynamics


def G(mu, kappa):
    """``dH/dmu = sinh(kappa) / (cosh(kappa) + cosh(mu))``, overflow-safe."""
    mu, kappa = np.asarray(mu, float), np.asarray(kappa, float)
    return expit(mu + kappa) - expit(mu - kappa)


def messages_to_logratio(state: MessageState) -> np.ndarray:
    v = state.values
    if v.shape[1] != 2:
        raise StructuralError("log-ratios need binary messages")
    return np.log(v[:, 1]) - np.log(v[:, 0])


def logratio_to_messages(graph: Graph, z) -> MessageState:
    z = np.asarray(z, dtype=float)
    return MessageState(graph, np.stack([expit(-z), expit(z)], axis=-1))


def z_update(theta: ThetaParams, alphas: AlphaAssignment | float, z) -> np.ndarray:
    """Apply ``F`` to every directed edge at once."""
    graph = theta.graph
    topo = graph.topology
    a, th = _directed(theta, alphas)
    z = np.asarray(z, dtype=float)
    if z.shape[-1] == 0:
        return z.copy()
    excl = apply_sparse(topo.excl, z[..., None])[..., 0]
    delta = 2.0 * theta.theta_node[topo.src] + (1.0 - a) * z[..., topo.rev] + excl
    return (1.0 - a) * z + H(delta, 2.0 * a * th)


def z_trajectory(theta: ThetaParams, alphas, iterations: int, z0=None) -> np.ndarray:
    """Iterates ``z^(0..iterations)``; ``z0`` defaults to zero (uniform messages)."""
    z = np.zeros(theta.graph.num_directed) if z0 is None else np.asarray(z0, dtype=float)
    out = [z]
    for _ in range(iterations):
        z = z_update(theta, alphas, z)
        out.append(z)
    return np.array(out)


@dataclass(frozen=True)
class ContractionReport:
    steps: int
    violations: int
    max_violation: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def contraction_check(
    theta: ThetaParams,
    alphas: AlphaAssignment | float,
    graph: Graph | None,
    z_trace,
    slack: float = 1e-9,
) -> ContractionReport:
    """Check ``|z(n+1) - z(n)| <= M |z(n) - z(n-1)|`` elementwise along a trace.

    ``max_violation`` is the largest ``lhs - rhs`` seen (negative when the
    bound holds with room to spare).
    """
    z = np.asarray(z_trace, dtype=float)
    if z.shape[0] < 3:
        raise ValueError("a contraction check needs at least three iterates")
    M = build_m_matrix(theta, alphas, graph).matrix
    d = np.abs(np.diff(z, axis=0))
    lhs, rhs = d[1:], d[:-1] @ M.T
    gap = lhs - rhs
    worst = float(gap.max()) if gap.size else -np.inf
    return ContractionReport(
        steps=lhs.shape[0],
        violations=int(np.sum(gap > slack)),
        max_violation=worst,
        slack=slack,
    )
