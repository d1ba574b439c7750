"""End-to-end acceptance checks.

Each check prints one ``PASS``/``FAIL`` line with the measured value next to
its pinned tolerance. Run ``python3 tests/test_acceptance.py`` for the plain
report or ``pytest tests/test_acceptance.py`` for the test form.
"""

import functools
import itertools
import os
import sys
import tempfile
from fractions import Fraction

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from alphabp import Graph, alpha_divergence, ising_to_mrf, kl_divergence  # noqa: E402
from alphabp.cli import main  # noqa: E402
from alphabp.convergence import (  # noqa: E402
    contraction_check,
    messages_to_logratio,
    theta_from_ising,
    z_trajectory,
)
from alphabp.experiments import run_trajectory, sweep_sigma  # noqa: E402
from alphabp.inference import (  # noqa: E402
    RunConfig,
    alpha_bp_step,
    bp_step,
    edge_appearance_probabilities,
    exact_marginals,
    init_messages,
    message_trajectory,
    run_alpha_bp,
)
from alphabp.mimo import ser_experiment  # noqa: E402
from alphabp.randgen import GraphSpec, PotentialSpec, derive_seed, erdos_renyi, sample_ising  # noqa: E402

from conftest import random_graph, random_mrf, random_tree  # noqa: E402

# pinned tolerances
REDUCTION_TOL = 1e-14
TREE_TOL = 1e-8
DYNAMICS_TOL = 1e-10
DYNAMICS_ALPHAS = (0.3, 0.5, 1.0, 1.5)
DYNAMICS_ITERS = 50
CONTRACTION_SLACK = 1e-9
CERT_ERROR_AT_150 = 1e-6
CERT_RATIO_SLACK = 1e-6
RESIDUAL_FLOOR = 1e-10
DIVERGENT_ERROR_AT_150 = 1e-2
SWEEP_SE = 2.0
MIMO_SE = 3.0
MU_TOL = 1e-12
DIV_EPS = 1e-4
DIV_TOL = 1e-3

# experiment sizes
SWEEP_SIGMAS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
SWEEP_GAMMAS = (0.2, 0.4)
SWEEP_ALPHAS = (0.5, 1.0)
SWEEP_TRIALS = 100
MIMO_N = 8
MIMO_TRIALS = 10_000
MIMO_SNR = (0, 2, 4, 6, 8, 10, 12, 14)
MIMO_ALGOS = ("map", "mmse", "bp", "alpha-bp:0.5", "alpha-bp-mmse:0.5", "mf", "damped:0.5", "trw")
SEED = 7


_sink = [print]


@pytest.fixture(autouse=True)
def _uncaptured_report(capsys):
    """Let report lines through pytest's capture so they land in the run log."""

    def emit(line):
        with capsys.disabled():
            print(f"\n{line}", flush=True)

    _sink[0] = emit
    yield
    _sink[0] = print


def report(num, ok, detail):
    _sink[0](f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}")
    return ok


# --- 1. reduction identity ----------------------------------------------------------


def check_reduction():
    worst = 0.0
    for k in range(200):
        rng = np.random.default_rng(derive_seed(1, k))
        g = random_graph(rng, int(rng.integers(2, 13)), 0.5)
        mrf = random_mrf(rng, g, k=2 if k % 2 == 0 else 3)
        state = init_messages(mrf, seed=k)
        a, b = alpha_bp_step(mrf, 1.0, state).values, bp_step(mrf, state).values
        if a.size:
            worst = max(worst, float(np.abs(a - b).max()))
    return report(1, worst <= REDUCTION_TOL, f"max |alpha=1 - BP| = {worst:.3g} over 200 MRFs (tol {REDUCTION_TOL:g})")


# --- 2. tree exactness --------------------------------------------------------------


def check_tree_exactness():
    worst = 0.0
    cfg = RunConfig(max_iterations=100, tolerance=1e-13)
    for k in range(100):
        rng = np.random.default_rng(derive_seed(2, k))
        mrf = random_mrf(rng, random_tree(rng, int(rng.integers(2, 13))), k=2 if k % 2 == 0 else 3)
        res = run_alpha_bp(mrf, 1.0, cfg)
        worst = max(worst, float(np.abs(res.marginals - exact_marginals(mrf)).max()))
    return report(2, worst <= TREE_TOL, f"max |BP - exact| = {worst:.3g} over 100 trees (tol {TREE_TOL:g})")


# --- 3/4. dynamics equivalence and contraction -----------------------------------------


@functools.lru_cache(maxsize=1)
def dynamics_traces():
    out = []
    for k in range(50):
        s = derive_seed(3, k)
        model = sample_ising(erdos_renyi(GraphSpec(16, 0.3, s)), PotentialSpec(0.5, s))
        theta, mrf = theta_from_ising(model), ising_to_mrf(model)
        for alpha in DYNAMICS_ALPHAS:
            z = z_trajectory(theta, alpha, DYNAMICS_ITERS)
            m = message_trajectory(mrf, alpha, DYNAMICS_ITERS)
            zm = np.log(m[..., 1]) - np.log(m[..., 0])
            out.append((theta, alpha, z, zm))
    return out


def check_dynamics():
    worst = max(float(np.abs(z - zm).max(initial=0.0)) for _, _, z, zm in dynamics_traces())
    return report(
        3,
        worst <= DYNAMICS_TOL,
        f"max |z - log-ratio(messages)| = {worst:.3g} over 50 graphs x {len(DYNAMICS_ALPHAS)} alphas, "
        f"{DYNAMICS_ITERS} iterations (tol {DYNAMICS_TOL:g})",
    )


def check_contraction():
    violations, worst = 0, -np.inf
    for theta, alpha, z, _ in dynamics_traces():
        rep = contraction_check(theta, alpha, None, z, slack=CONTRACTION_SLACK)
        violations += rep.violations
        worst = max(worst, rep.max_violation)
    return report(4, violations == 0, f"{violations} violations, worst lhs - rhs = {worst:.3g} (slack {CONTRACTION_SLACK:g})")


# --- 5/6. certified and divergent regimes -----------------------------------------------


def check_certified_regime():
    res = run_trajectory(16, 0.2, 0.5, 0.1, trials=100, iters=200, seed=SEED, require_certified=True)
    err150 = float(res.errors[:, 150].max())
    worst_ratio_gap = -np.inf
    for t in res.trials:
        r = t.z_residuals
        live = r[:-1] >= RESIDUAL_FLOOR
        if live.any():
            worst_ratio_gap = max(worst_ratio_gap, float(np.max(r[1:][live] / r[:-1][live] - t.lambda_star)))
    ok = err150 < CERT_ERROR_AT_150 and worst_ratio_gap <= CERT_RATIO_SLACK
    return report(
        5,
        ok,
        f"max error at n=150 = {err150:.3g} (< {CERT_ERROR_AT_150:g}); "
        f"max residual ratio - lambda* = {worst_ratio_gap:.3g} (<= {CERT_RATIO_SLACK:g})",
    )


def check_divergent_regime():
    res = run_trajectory(16, 0.4, 1.0, 0.5, trials=100, iters=200, seed=SEED)
    mean150 = float(res.errors[:, 150].mean())
    return report(6, mean150 > DIVERGENT_ERROR_AT_150, f"mean error at n=150 = {mean150:.3g} (> {DIVERGENT_ERROR_AT_150:g})")


# --- 7. lambda* sweep -----------------------------------------------------------------


def check_sweep():
    rows = sweep_sigma(16, SWEEP_GAMMAS, SWEEP_ALPHAS, SWEEP_SIGMAS, SWEEP_TRIALS, seed=SEED)
    by = {(r.gamma, r.alpha, r.sigma): r for r in rows}
    drops, dominance = [], []
    for g, a in itertools.product(SWEEP_GAMMAS, SWEEP_ALPHAS):
        for s0, s1 in zip(SWEEP_SIGMAS, SWEEP_SIGMAS[1:]):
            r0, r1 = by[(g, a, s0)], by[(g, a, s1)]
            se = np.hypot(r0.stderr_lambda, r1.stderr_lambda)
            if r1.mean_lambda < r0.mean_lambda - SWEEP_SE * se:
                drops.append((g, a, s0, s1))
    for a, s in itertools.product(SWEEP_ALPHAS, SWEEP_SIGMAS):
        if by[(0.4, a, s)].mean_lambda < by[(0.2, a, s)].mean_lambda:
            dominance.append((a, s))
    return report(
        7,
        not drops and not dominance,
        f"{len(drops)} monotonicity breaks beyond {SWEEP_SE:g} SE, {len(dominance)} dominance breaks "
        f"({len(SWEEP_GAMMAS) * len(SWEEP_ALPHAS)} curves, {len(SWEEP_SIGMAS)} sigmas, {SWEEP_TRIALS} trials)",
    )


# --- 8. MIMO orderings ----------------------------------------------------------------


@functools.lru_cache(maxsize=1)
def mimo_errors():
    _, err = ser_experiment(MIMO_N, MIMO_ALGOS, MIMO_SNR, MIMO_TRIALS, seed=SEED, return_errors=True)
    return err / MIMO_N  # per-trial symbol error fraction, (snr, algo, trial)


def _paired_z(better, worse):
    """``(mean(better) - mean(worse)) / SE`` of the paired difference."""
    d = better - worse
    se = d.std(ddof=1) / np.sqrt(d.size)
    return d.mean() / se if se > 0 else (0.0 if d.mean() == 0 else np.copysign(np.inf, d.mean()))


def check_mimo_map():
    e = mimo_errors()
    i_map = MIMO_ALGOS.index("map")
    worst, where = -np.inf, None
    for i, snr in enumerate(MIMO_SNR):
        for j, name in enumerate(MIMO_ALGOS):
            if j != i_map:
                z = _paired_z(e[i, i_map], e[i, j])
                if z > worst:
                    worst, where = z, (snr, name)
    return report(
        "8a",
        worst <= MIMO_SE,
        f"max (SER(MAP) - SER(alg)) = {worst:.3g} paired SE at {where[0]} dB vs {where[1]} (<= {MIMO_SE:g})",
    )


def _upper_half_check(label, better, worse):
    e = mimo_errors()
    jb, jw = MIMO_ALGOS.index(better), MIMO_ALGOS.index(worse)
    upper = range(len(MIMO_SNR) // 2, len(MIMO_SNR))
    diffs = [e[i, jb].mean() - e[i, jw].mean() for i in upper]
    return report(
        label,
        max(diffs) <= 0,
        f"SER({better}) - SER({worse}) at {MIMO_SNR[upper[0]]}..{MIMO_SNR[-1]} dB: max {max(diffs):.4g} (<= 0)",
    )


def check_mimo_alpha_vs_bp():
    return _upper_half_check("8b", "alpha-bp:0.5", "bp")


def check_mimo_prior_vs_mmse():
    return _upper_half_check("8c", "alpha-bp-mmse:0.5", "mmse")


# --- 9. spanning-tree oracle ------------------------------------------------------------


def _spanning_tree_counts(n, edges):
    """Exact per-edge spanning-tree counts by listing every (n-1)-edge subset."""
    counts, total = [0] * len(edges), 0
    for combo in itertools.combinations(range(len(edges)), n - 1):
        parent = list(range(n))

        def find(u):
            while parent[u] != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        acyclic = True
        for i in combo:
            a, b = find(edges[i][0]), find(edges[i][1])
            if a == b:
                acyclic = False
                break
            parent[a] = b
        if acyclic:
            total += 1
            for i in combo:
                counts[i] += 1
    return [Fraction(c, total) for c in counts]


def check_spanning_oracle():
    rng = np.random.default_rng(derive_seed(9, 0))
    worst, tested = 0.0, 0
    for _ in range(50):
        g = random_graph(rng, int(rng.integers(2, 8)), 0.6)
        if not g.is_connected():
            continue
        tested += 1
        exact = _spanning_tree_counts(g.num_nodes, list(g.edges))
        mu = edge_appearance_probabilities(g).mu
        worst = max([worst] + [abs(float(m) - float(f)) for m, f in zip(mu, exact)])
    return report(9, worst <= MU_TOL, f"max |mu - enumeration| = {worst:.3g} on {tested} connected graphs (tol {MU_TOL:g})")


# --- 10. divergence limits --------------------------------------------------------------


def check_divergence_limits():
    rng = np.random.default_rng(derive_seed(10, 0))
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 6))
        p, q = rng.uniform(0.1, 1.0, k), rng.uniform(0.1, 1.0, k)
        p, q = p / p.sum(), q / q.sum()
        kl_pq, kl_qp = kl_divergence(p, q), kl_divergence(q, p)
        for a, ref in ((1 - DIV_EPS, kl_pq), (1 + DIV_EPS, kl_pq), (-DIV_EPS, kl_qp), (DIV_EPS, kl_qp)):
            worst = max(worst, abs(alpha_divergence(p, q, a) - ref))
    return report(10, worst <= DIV_TOL, f"max |D_alpha - KL limit| = {worst:.3g} over 1000 pairs (tol {DIV_TOL:g})")


# --- 11. CLI determinism ----------------------------------------------------------------


def _cli_runs(d):
    """Argument lists for every command; ``{out}`` is replaced per run."""
    model = os.path.join(d, "model.json")
    csv = os.path.join(d, "sweep.csv")
    main(["sample", "--n", "12", "--gamma", "0.3", "--sigma", "0.3", "--seed", "3", "--out", model])
    main(["sweep-sigma", "--gammas", "0.2,0.4", "--alphas", "0.5", "--sigmas", "0.1:0.3:0.1",
          "--trials", "5", "--seed", "3", "--out", csv])
    return {
        "sample": ["sample", "--n", "12", "--gamma", "0.2", "--sigma", "0.1", "--seed", "5",
                   "--require-certified", "--alpha", "0.5"],
        "certify": ["certify", "--model", model, "--alpha", "0.5"],
        "infer": ["infer", "--model", model, "--algo", "alpha-bp", "--alpha", "0.7", "--anneal", "1.0:0.5"],
        "infer-trw": ["infer", "--model", model, "--algo", "trw"],
        "sweep-sigma": ["sweep-sigma", "--gammas", "0.2,0.4", "--alphas", "0.5,1.0", "--sigmas", "0.1,0.5",
                        "--trials", "5", "--seed", "3"],
        "trajectory": ["trajectory", "--gamma", "0.2", "--alpha", "0.5", "--sigma", "0.1", "--trials", "3",
                       "--iters", "40", "--seed", "3", "--require-certified"],
        "mimo-ser": ["mimo-ser", "--n", "4", "--snr-db", "0:4:8", "--trials", "200",
                     "--algos", "map,mmse,bp,alpha-bp:0.5,alpha-bp-mmse:0.5,mf,damped:0.5,trw", "--seed", "3"],
        "plot": ["plot", "--csv", csv, "--kind", "lines", "--logy"],
    }


def check_cli_determinism():
    mismatched = []
    with tempfile.TemporaryDirectory() as d:
        runs = _cli_runs(d)
        for name, argv in runs.items():
            outs = []
            for rep in range(2):
                path = os.path.join(d, f"{name}.{rep}")
                code = main(argv + ["--out", path])
                with open(path, "rb") as fh:
                    outs.append((code, fh.read()))
            if outs[0] != outs[1] or not outs[0][1]:
                mismatched.append(name)
    return report(11, not mismatched, f"{len(runs) - len(mismatched)}/{len(runs)} commands byte-identical across reruns")


# --- pytest wrappers --------------------------------------------------------------------


def test_reduction_identity():
    assert check_reduction()


def test_tree_exactness():
    assert check_tree_exactness()


def test_dynamics_equivalence():
    assert check_dynamics()


def test_contraction_bound():
    assert check_contraction()


def test_certified_regime_converges():
    assert check_certified_regime()


def test_divergent_regime_stalls():
    assert check_divergent_regime()


def test_lambda_sweep_trends():
    assert check_sweep()


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="joint MAP minimizes block error, not symbol error; the per-symbol max-marginal "
    "detector beats it at low SNR, so some detectors do too",
)
def test_mimo_map_lowest_ser():
    assert check_mimo_map()


@pytest.mark.slow
def test_mimo_alpha_beats_bp():
    assert check_mimo_alpha_vs_bp()


@pytest.mark.slow
def test_mimo_prior_beats_mmse():
    assert check_mimo_prior_vs_mmse()


def test_spanning_tree_oracle():
    assert check_spanning_oracle()


def test_divergence_limits():
    assert check_divergence_limits()


def test_cli_determinism():
    assert check_cli_determinism()


CHECKS = (
    check_reduction,
    check_tree_exactness,
    check_dynamics,
    check_contraction,
    check_certified_regime,
    check_divergent_regime,
    check_sweep,
    check_mimo_map,
    check_mimo_alpha_vs_bp,
    check_mimo_prior_vs_mmse,
    check_spanning_oracle,
    check_divergence_limits,
    check_cli_determinism,
)

if __name__ == "__main__":
    results = [c() for c in CHECKS]
    sys.exit(0 if all(results) else 1)
