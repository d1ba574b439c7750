"""Random-graph experiment harnesses: lambda* sweeps and error trajectories."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .convergence import certify, theta_from_ising, z_trajectory
from .inference.engine import message_trajectory
from .mrf import Graph, IsingModel, ising_to_mrf
from .randgen import (
    GraphSpec,
    PotentialSpec,
    derive_seed,
    erdos_renyi,
    sample_certified,
    sample_ising,
)

__all__ = [
    "SweepRow",
    "TrajectoryTrial",
    "TrajectoryResult",
    "sweep_sigma",
    "run_trajectory",
    "normalized_errors",
    "sweep_to_csv",
    "trajectory_to_csv",
    "parse_grid",
    "fmt",
]


def fmt(v) -> str:
    """12 significant digits; integers stay integral."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


MAX_GRID_POINTS = 100_000


def parse_grid(text: str) -> list[float]:
    """``a,b,c`` lists or inclusive three-part ranges.

    ``a:b:c`` reads as start:stop:step when ``c <= b - a`` (``0.05:1.0:0.05``)
    and as start:step:stop otherwise (``0:2:14``).
    """
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError(f"bad range {text!r}; expected three ':'-separated numbers")
        a, b, c = parts
        start, stop, step = (a, b, c) if c <= b - a else (a, c, b)
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        if count > MAX_GRID_POINTS:
            raise ValueError(f"range {text!r} has {count} points (limit {MAX_GRID_POINTS})")
        return [float(format(start + i * step, ".12g")) for i in range(count)]
    values = [float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ValueError("empty grid")
    return values


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    alpha: float
    sigma: float
    trials: int
    mean_lambda: float
    stderr_lambda: float
    min_lambda: float
    max_lambda: float
    certified_fraction: float


def _trial_graph(n: int, gamma: float, seed: int, k: int) -> Graph:
    return erdos_renyi(GraphSpec(n, gamma, derive_seed(seed, k)))


def sweep_sigma(n: int, gammas, alphas, sigmas, trials: int, seed: int = 0) -> list[SweepRow]:
    """Mean/min/max of lambda* over ``trials`` realizations per (gamma, alpha, sigma).

    Trial ``k`` uses the same sub-seeds at every grid point, so curves are
    compared on common random numbers.
    """
    rows = []
    for gamma in gammas:
        graphs = [_trial_graph(n, gamma, seed, k) for k in range(trials)]
        for alpha in alphas:
            for sigma in sigmas:
                lam = np.array([
                    certify(theta_from_ising(sample_ising(g, PotentialSpec(sigma, derive_seed(seed, k)))), alpha).lambda_star
                    for k, g in enumerate(graphs)
                ])
                se = float(lam.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
                rows.append(SweepRow(
                    float(gamma), float(alpha), float(sigma), trials, float(lam.mean()), se,
                    float(lam.min()), float(lam.max()), float(np.mean(lam < 1.0)),
                ))
    return rows


SWEEP_COLUMNS = (
    "gamma", "alpha", "sigma", "trials", "mean_lambda", "stderr_lambda",
    "min_lambda", "max_lambda", "certified_fraction",
)


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("# schema=1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([fmt(getattr(r, c)) for c in SWEEP_COLUMNS])
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class TrajectoryTrial:
    model: IsingModel
    lambda_star: float
    retries: int
    errors: np.ndarray  # normalized message error per iteration, length iters+1
    z_residuals: np.ndarray = field(repr=False)  # ||z(n+1) - z(n)||_2, length iters


@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    trials: list[TrajectoryTrial]

    @property
    def errors(self) -> np.ndarray:
        return np.array([t.errors for t in self.trials])

    def summary(self) -> np.ndarray:
        """Rows ``(iteration, min, mean, max)`` of the normalized error."""
        e = self.errors
        it = np.arange(e.shape[1])
        return np.column_stack([it, e.min(axis=0), e.mean(axis=0), e.max(axis=0)])


def normalized_errors(traj) -> np.ndarray:
    """``||m(n) - m*||_2 / ||m*||_2`` with ``m*`` the last entry of ``traj``."""
    traj = np.asarray(traj, dtype=float).reshape(len(traj), -1)
    ref = traj[-1]
    denom = np.linalg.norm(ref)
    if denom == 0:
        return np.zeros(len(traj))
    return np.linalg.norm(traj - ref, axis=1) / denom


def run_trajectory(
    n: int,
    gamma: float,
    alpha: float,
    sigma: float,
    trials: int,
    iters: int = 200,
    seed: int = 0,
    require_certified: bool = False,
    max_retries: int = 100,
) -> TrajectoryResult:
    """Normalized error ``||m(n) - m*|| / ||m*||`` with ``m*`` the messages after ``iters`` steps."""
    if iters < 2:
        raise ValueError("iters must be >= 2")
    out = []
    for k in range(trials):
        gs = GraphSpec(n, gamma, derive_seed(seed, k))
        ps = PotentialSpec(sigma, derive_seed(seed, k))
        if require_certified:
            _, model, retries = sample_certified(gs, ps, alpha, max_retries)
        else:
            model, retries = sample_ising(erdos_renyi(gs), ps), 0
        theta = theta_from_ising(model)
        lam = certify(theta, alpha).lambda_star
        errors = normalized_errors(message_trajectory(ising_to_mrf(model), alpha, iters))
        z = z_trajectory(theta, alpha, iters)
        out.append(TrajectoryTrial(model, lam, retries, errors, np.linalg.norm(np.diff(z, axis=0), axis=1)))
    return TrajectoryResult(out)


TRAJECTORY_COLUMNS = ("iteration", "min_error", "mean_error", "max_error")


def trajectory_to_csv(result: TrajectoryResult, meta: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write("# schema=1\n")
    if meta:
        buf.write("# " + " ".join(f"{k}={fmt(v) if not isinstance(v, str) else v}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for row in result.summary():
        w.writerow([str(int(row[0]))] + [fmt(v) for v in row[1:]])
    return buf.getvalue()
