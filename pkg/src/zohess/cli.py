"""Command line entry point: ``zohess {estimate,bench,invert,timing}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness
from .estimators import ESTIMATOR_KEYS, NoiseModel, budgeted_estimate, estimation_error
from .harness import ConfigError, ExperimentConfig
from .inversion import CHA_MAX_DIM, adjugate_reference, cha_with_determinant, nhi
from .manifold import MANIFOLD_KEYS, chart_from_key, euclidean
from .oracle import OBJECTIVE_KEYS, Objective, analytic_hessian, default_quadratic_matrix, objective_from_key
from .sampling import RngStream, stream_id_for

log = logging.getLogger("zohess")


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _csv_words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zohess", description="Zeroth-order Hessian estimators on manifolds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="print one budgeted Hessian estimate as JSON")
    p.add_argument("--estimator", choices=ESTIMATOR_KEYS, default="new")
    p.add_argument("--manifold", choices=MANIFOLD_KEYS, default="euclidean")
    p.add_argument("--objective", choices=OBJECTIVE_KEYS, default="paper-test")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=3840)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--noise-var", type=float, default=0.0025)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="run the error-distribution benchmark and write CSV")
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--manifold", choices=MANIFOLD_KEYS)
    p.add_argument("--objective", choices=OBJECTIVE_KEYS)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--deltas", type=_csv_floats, help="comma-separated step sizes")
    p.add_argument("--noise-var", dest="noise_variance", type=float)
    p.add_argument("--reps", dest="repetitions", type=int)
    p.add_argument("--estimators", type=_csv_words, help="comma-separated estimator keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o")
    p.add_argument("--workers", type=int)
    p.add_argument("--record-timings", action="store_true", default=None)

    p = sub.add_parser("invert", help="zeroth-order Hessian adjugate (cha) or inverse (nhi)")
    p.add_argument("--method", choices=("cha", "nhi"), required=True)
    p.add_argument("--objective", choices=("quadratic", "paper-test"), default="quadratic")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=100, help="CHA repetitions")
    p.add_argument("--backend", choices=("stabilized", "entrywise"), default="stabilized")
    p.add_argument("--m1", type=int, default=10)
    p.add_argument("--m2", type=int, default=20)
    p.add_argument("--m3", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0,
                   help="run on scale*f and undo the scaling in the output")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("timing", help="sampling / evaluation / computation timing table")
    p.add_argument("--manifold", choices=MANIFOLD_KEYS, default="graph-flat")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=10_000)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--noise-var", type=float, default=0.0025)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    return parser


def _matrix(a) -> list[list[float]]:
    return np.asarray(a, dtype=float).tolist()


def cmd_estimate(args) -> dict:
    chart = chart_from_key(args.manifold, args.n)
    p = chart.base_point()
    objective = objective_from_key(args.objective, chart)
    truth = analytic_hessian(objective, chart, p)
    rng = RngStream(args.seed, stream_id_for(args.estimator, args.delta, 0))
    est = budgeted_estimate(args.estimator, objective, chart, p, args.m, args.delta,
                            NoiseModel(args.noise_var), rng)
    config = {k: getattr(args, k) for k in ("estimator", "manifold", "objective", "n", "m", "delta", "noise_var")}
    return {"matrix": _matrix(est.form.coeffs), "config": config, "seed": args.seed,
            "evals": objective.evaluations, "error": estimation_error(est.form, truth)}


def cmd_bench(args) -> dict:
    base = harness.load_config(args.config) if args.config else ExperimentConfig()
    overrides = {k: v for k, v in vars(args).items()
                 if k in {f for f in ExperimentConfig.__dataclass_fields__} and v is not None}
    config = harness.config_from_mapping(overrides, base).validate()
    records = harness.run_bias_experiment(config)
    path = harness.emit_csv(records, config.output, config)
    medians = harness.median_errors(records)
    return {"output": str(path), "records": len(records),
            "median_error": {f"{e}@{d!r}": v for (e, d), v in sorted(medians.items())}}


def cmd_invert(args) -> dict:
    n = args.n
    if n < 1:
        raise ConfigError("n must be positive")
    if not args.scale > 0:
        raise ConfigError("scale must be positive")
    chart = euclidean(n)
    if args.objective == "quadratic":
        objective = Objective.quadratic(default_quadratic_matrix(n))
    else:
        objective = Objective.paper_test()
    x = chart.base_point()
    c = args.scale

    def scaled(X):
        return c * objective(X)

    noise = NoiseModel(args.noise_var)
    rng = RngStream(args.seed, stream_id_for("invert", args.method))
    truth = analytic_hessian(objective, chart, x).coeffs
    out = {"seed": args.seed}
    if args.method == "cha":
        if n > CHA_MAX_DIM:
            raise ConfigError(f"CHA draws m*n^4 direction pairs; n is capped at {CHA_MAX_DIM}")
        adj, det = cha_with_determinant(scaled, x, args.m, args.delta, noise, rng, backend=args.backend)
        # adj(cH) = c^(n-1) adj(H), det(cH) = c^n det(H)
        out.update(matrix=_matrix(adj / c ** (n - 1)), det=det / c**n,
                   reference=_matrix(adjugate_reference(truth)))
        config = {k: getattr(args, k) for k in ("method", "objective", "n", "m", "backend", "delta", "noise_var", "scale")}
    else:
        stats = {}
        inv = nhi(scaled, x, args.m1, args.m2, args.m3, args.delta, noise, rng, stats=stats)
        out.update(matrix=_matrix(inv * c), reference=_matrix(np.linalg.inv(truth)),
                   standard_error=stats["standard_error"] * c)
        config = {k: getattr(args, k) for k in ("method", "objective", "n", "m1", "m2", "m3", "delta", "noise_var", "scale")}
    out.update(config=config, evals=objective.evaluations)
    return out


def cmd_timing(args):
    config = ExperimentConfig(manifold=args.manifold, n=args.n, m=args.m, deltas=(args.delta,),
                              noise_variance=args.noise_var, repetitions=args.repeats,
                              estimators=("new", "stein"), seed=args.seed)
    summary = harness.run_timing(config)
    if args.json:
        return {est: {c: {"mean": m, "std": s} for c, (m, s) in cols.items()} for est, cols in summary.items()}
    return harness.format_timing(summary)


COMMANDS = {"estimate": cmd_estimate, "bench": cmd_bench, "invert": cmd_invert, "timing": cmd_timing}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = COMMANDS[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"zohess {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if isinstance(result, str):
        print(result)
    else:
        print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
