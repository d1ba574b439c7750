"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 certificate failure, 3 sampling exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys

from .convergence import certify, theta_from_ising, theta_from_mrf
from .errors import AlphaBPError, ParameterError, SamplingExhausted
from .experiments import parse_grid, run_trajectory, sweep_sigma, sweep_to_csv, trajectory_to_csv
from .inference import (
    AnnealSchedule,
    BeliefResult,
    RunConfig,
    exact_marginals,
    mean_field_run,
    run_alpha_bp,
    run_damped_bp,
    run_trw,
)
from .mimo import ser_experiment, ser_rows_to_csv
from .mrf import IsingModel, dump_model, ising_to_mrf, load_model
from .plot import SchemaError, plot_csv
from .randgen import GraphSpec, PotentialSpec, erdos_renyi, sample_certified, sample_ising

EXIT_OK, EXIT_INPUT, EXIT_CERT, EXIT_EXHAUSTED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse's default usage-error status (2) would collide with certificate failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _grid(text: str) -> list[float]:
    try:
        return parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _anneal(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None
    return a, b


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def cmd_certify(args) -> int:
    model = load_model(args.model)
    theta = theta_from_ising(model) if isinstance(model, IsingModel) else theta_from_mrf(model)
    cert = certify(theta, args.alpha)
    _write(args.out, cert.to_json() + "\n")
    return EXIT_OK if cert.theorem1_holds else EXIT_CERT


def cmd_infer(args) -> int:
    model = load_model(args.model)
    mrf = ising_to_mrf(model) if isinstance(model, IsingModel) else model
    anneal = AnnealSchedule(*args.anneal, args.max_iter) if args.anneal else None
    if anneal is not None and args.algo != "alpha-bp":
        raise ParameterError("--anneal only applies to alpha-bp")
    config = RunConfig(max_iterations=args.max_iter, tolerance=args.tol, anneal=anneal)
    if args.algo == "exact":
        result = BeliefResult(exact_marginals(mrf), True, 0, ())
    elif args.algo == "bp":
        result = run_alpha_bp(mrf, 1.0, config)
    elif args.algo == "alpha-bp":
        result = run_alpha_bp(mrf, args.alpha, config)
    elif args.algo == "damped":
        result = run_damped_bp(mrf, args.gamma, config)
    elif args.algo == "mf":
        result = mean_field_run(mrf, config)
    else:
        result = run_trw(mrf, None, config)
    _write(args.out, result.to_json() + "\n")
    return EXIT_OK


def cmd_sample(args) -> int:
    gs, ps = GraphSpec(args.n, args.gamma, args.seed), PotentialSpec(args.sigma, args.seed)
    retries = 0
    if args.require_certified:
        graph, model, retries = sample_certified(gs, ps, args.alpha, args.max_retries)
    else:
        graph = erdos_renyi(gs)
        model = sample_ising(graph, ps)
    prov = {
        "gamma": args.gamma, "sigma": args.sigma, "seed": args.seed,
        "connected": graph.is_connected(), "retries": retries,
    }
    if args.out == "-":
        from .mrf import model_to_dict

        _write("-", json.dumps(model_to_dict(model, prov), indent=1) + "\n")
    else:
        dump_model(model, args.out, prov)
    return EXIT_OK


def cmd_sweep_sigma(args) -> int:
    rows = sweep_sigma(args.n, args.gammas, args.alphas, args.sigmas, args.trials, args.seed)
    _write(args.out, sweep_to_csv(rows))
    return EXIT_OK


def cmd_trajectory(args) -> int:
    if args.iters < 2:
        raise ParameterError("--iters must be >= 2")
    result = run_trajectory(
        args.n, args.gamma, args.alpha, args.sigma, args.trials, args.iters, args.seed,
        require_certified=args.require_certified, max_retries=args.max_retries,
    )
    meta = {
        "n": args.n, "gamma": args.gamma, "alpha": args.alpha, "sigma": args.sigma,
        "trials": args.trials, "iters": args.iters, "seed": args.seed,
        "require_certified": args.require_certified,
    }
    _write(args.out, trajectory_to_csv(result, meta))
    return EXIT_OK


def cmd_mimo_ser(args) -> int:
    algos = [a for a in args.algos.split(",") if a.strip()]
    points = ser_experiment(args.n, algos, args.snr_db, args.trials, args.seed, fresh_channel=not args.fixed_channel)
    _write(args.out, ser_rows_to_csv(points))
    return EXIT_OK


def cmd_plot(args) -> int:
    with open(args.csv) as fh:
        text = fh.read()
    _write(args.out, plot_csv(text, logy=args.logy))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="alphabp", description="alpha-BP inference, certificates and experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("certify", help="convergence certificate for a binary model")
    c.add_argument("--model", required=True)
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_certify)

    c = sub.add_parser("infer", help="run one inference algorithm on a model")
    c.add_argument("--model", required=True)
    c.add_argument("--algo", required=True, choices=("exact", "bp", "alpha-bp", "damped", "mf", "trw"))
    c.add_argument("--alpha", type=float, default=1.0)
    c.add_argument("--gamma", type=float, default=0.5, help="damping factor for --algo damped")
    c.add_argument("--max-iter", type=int, default=200)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--anneal", type=_anneal, metavar="A:B")
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_infer)

    c = sub.add_parser("sample", help="draw a seeded Erdos-Renyi Ising model")
    c.add_argument("--n", type=_positive_int, default=16)
    c.add_argument("--gamma", type=float, required=True)
    c.add_argument("--sigma", type=float, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--require-certified", action="store_true")
    c.add_argument("--alpha", type=float, default=1.0)
    c.add_argument("--max-retries", type=_positive_int, default=100)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_sample)

    c = sub.add_parser("sweep-sigma", help="mean lambda* versus sigma")
    c.add_argument("--n", type=_positive_int, default=16)
    c.add_argument("--gammas", type=_grid, required=True)
    c.add_argument("--alphas", type=_grid, required=True)
    c.add_argument("--sigmas", type=_grid, required=True)
    c.add_argument("--trials", type=_positive_int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_sweep_sigma)

    c = sub.add_parser("trajectory", help="normalized message error per iteration")
    c.add_argument("--n", type=_positive_int, default=16)
    c.add_argument("--gamma", type=float, required=True)
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--sigma", type=float, required=True)
    c.add_argument("--trials", type=_positive_int, default=100)
    c.add_argument("--iters", type=int, default=200)
    c.add_argument("--require-certified", action="store_true")
    c.add_argument("--max-retries", type=_positive_int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_trajectory)

    c = sub.add_parser("mimo-ser", help="MIMO detection symbol error rates")
    c.add_argument("--n", type=_positive_int, default=8)
    c.add_argument("--snr-db", type=_grid, required=True)
    c.add_argument("--trials", type=_positive_int, default=10000)
    c.add_argument("--algos", required=True)
    c.add_argument("--fixed-channel", action="store_true", help="one channel draw shared by all trials")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_mimo_ser)

    c = sub.add_parser("plot", help="render an experiment CSV as SVG")
    c.add_argument("--csv", required=True)
    c.add_argument("--kind", default="lines", choices=("lines",))
    c.add_argument("--logy", action="store_true")
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SamplingExhausted as exc:
        print(f"alphabp: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except (AlphaBPError, SchemaError, ValueError, OSError, KeyError) as exc:
        print(f"alphabp {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
