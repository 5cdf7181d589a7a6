"""Command-line interface.

Subcommands: gen-instance, tau-star, gdesign, run, bench, plot.
Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__, kernels
from .design import design_matrix, g_optimal, leverages, tau_star
from .errors import ConfigError, DegenerateTargetError, InputError, LinbaiError, NumericalError, RankError
from .harness import ExperimentConfig, ResultStore, default_checkpoints, run_experiment
from .instances import load_instance, make_soare, make_sphere, make_topk, save_instance
from .rng import instance_stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linbai",
        description="Best-arm identification for linear bandits: strategies, design solvers, benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"linbai {__version__}")
    parser.add_argument("--backend", choices=kernels.available_backends(),
                        help="kernel backend override for this invocation")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-instance", help="emit an instance JSON document")
    gen.add_argument("--kind", required=True, choices=("soare", "sphere", "topk"))
    gen.add_argument("--omega", type=float, default=0.1, help="soare angle (radians)")
    gen.add_argument("--d", type=int, default=6, help="dimension (sphere/topk)")
    gen.add_argument("--n-arms", type=int, default=20, help="arm count (sphere)")
    gen.add_argument("--k", type=int, default=3, help="subset size (topk)")
    gen.add_argument("--seed", type=int, default=0, help="generator seed (sphere)")
    gen.add_argument("--out", help="output file (default: stdout)")

    tau = sub.add_parser("tau-star", help="solve the max-min allocation game")
    tau.add_argument("--instance", required=True)
    tau.add_argument("--iters", type=int, default=2000)
    tau.add_argument("--tol", type=float, default=1e-2)

    gd = sub.add_parser("gdesign", help="G-optimal design weights with certificate")
    gd.add_argument("--instance", required=True)
    gd.add_argument("--tol", type=float, default=1e-3)

    run = sub.add_parser("run", help="run one strategy for one repetition; write metric CSV")
    run.add_argument("--instance", required=True)
    run.add_argument("--strategy", required=True,
                     choices=("peps", "lints", "lingame", "fixed", "oracle"))
    run.add_argument("--T", type=int, required=True, dest="t_max")
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--out", help="output CSV path (default: stdout)")
    run.add_argument("--mode", choices=("practical", "theoretical"), default="practical")
    run.add_argument("--learner", choices=("hedge", "adahedge"))
    run.add_argument("--alpha", type=float)
    run.add_argument("--eta-p", type=float)
    run.add_argument("--eta-lambda", type=float)
    run.add_argument("--rejection-budget", type=int)
    run.add_argument("--forced-exploration", action="store_true", default=None)
    run.add_argument("--ball-radius", type=float, help="use a Ball parameter space of this radius")
    run.add_argument("--weights", help="comma-separated design weights (fixed strategy)")
    run.add_argument("--mc-draws", type=int, default=1000)
    run.add_argument("--checkpoint-stride", type=int)

    bench = sub.add_parser("bench", help="run a full experiment config")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True, help="output directory")
    bench.add_argument("--workers", type=int, help="override worker count (or set BANDIT_THREADS)")

    plot = sub.add_parser("plot", help="render SVG plots from a results CSV")
    plot.add_argument("--in", dest="input", required=True)
    plot.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_gen_instance(args) -> int:
    if args.kind == "soare":
        inst = make_soare(args.omega)
    elif args.kind == "sphere":
        inst = make_sphere(instance_stream(args.seed, f"sphere_d{args.d}_n{args.n_arms}"),
                           args.d, args.n_arms)
    else:
        inst = make_topk(args.d, args.k)
    if args.out:
        save_instance(inst, args.out)
    else:
        print(inst.to_json())
    return EXIT_OK


def _cmd_tau_star(args) -> int:
    instance = load_instance(args.instance)
    sol = tau_star(instance, iters=args.iters, tol=args.tol)
    print(json.dumps({
        "tau_star": sol.tau_star,
        "lambda_star": [float(w) for w in sol.lambda_star],
        "duality_gap_estimate": sol.duality_gap_estimate,
        "iterations": sol.iterations,
        "converged": sol.converged,
    }, indent=2))
    return EXIT_OK


def _cmd_gdesign(args) -> int:
    instance = load_instance(args.instance)
    weights = g_optimal(instance.arms, tol=args.tol)
    a_inv = np.linalg.inv(design_matrix(instance.arms, weights) + 1e-10 * np.eye(instance.dim))
    print(json.dumps({
        "weights": [float(w) for w in weights],
        "max_leverage": float(leverages(instance.arms, a_inv).max()),
        "dim": instance.dim,
    }, indent=2))
    return EXIT_OK


def _strategy_spec_from_args(args) -> dict:
    spec: dict = {"strategy": args.strategy, "mode": args.mode}
    if args.learner is not None:
        spec["learner"] = args.learner
    if args.alpha is not None:
        spec["alpha"] = args.alpha
    if args.eta_p is not None:
        spec["eta_p"] = args.eta_p
    if args.eta_lambda is not None:
        spec["eta_lambda"] = args.eta_lambda
    if args.rejection_budget is not None:
        spec["rejection_budget"] = args.rejection_budget
    if args.forced_exploration is not None:
        spec["forced_exploration"] = args.forced_exploration
    if args.ball_radius is not None:
        spec["theta_space"] = {"kind": "ball", "radius": args.ball_radius}
    if args.weights is not None:
        spec["weights"] = [float(w) for w in args.weights.split(",")]
    return spec


def _cmd_run(args) -> int:
    instance = load_instance(args.instance)
    spec = _strategy_spec_from_args(args)
    config = ExperimentConfig(
        instance=instance,
        strategies=[spec],
        t_max=args.t_max,
        repetitions=1,
        master_seed=args.seed,
        checkpoints=default_checkpoints(args.t_max, args.checkpoint_stride),
        mc_draws=args.mc_draws,
    )
    store = run_experiment(config, workers=1)
    if store.errors:
        print(store.errors_csv_text(), file=sys.stderr)
        message = store.errors[0].error
        if message.startswith(("ConfigError", "InputError", "DegenerateTargetError", "DimensionError")):
            raise ConfigError(f"repetition failed: {message}")
        raise NumericalError(f"repetition failed: {message}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(store.csv_text())
    else:
        sys.stdout.write(store.csv_text())
    return EXIT_OK


def _cmd_bench(args) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    store = run_experiment(config, workers=args.workers)
    paths = store.write(args.out)
    summary = {
        "rows": len(store.rows),
        "errors": len(store.errors),
        "aggregates": store.metadata.get("aggregates", {}),
        "paths": paths,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plotting import emit_plots

    store = ResultStore.read_csv(args.input)
    written = emit_plots(store, args.out)
    for path in written:
        print(path)
    return EXIT_OK


_COMMANDS = {
    "gen-instance": _cmd_gen_instance,
    "tau-star": _cmd_tau_star,
    "gdesign": _cmd_gdesign,
    "run": _cmd_run,
    "bench": _cmd_bench,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.backend:
            kernels.use_backend(args.backend)
        return _COMMANDS[args.command](args)
    except (ConfigError, InputError, DegenerateTargetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, RankError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LinbaiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
