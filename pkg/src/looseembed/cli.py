"""Command-line driver.

Every command prints one JSON report on stdout; diagnostics and wall time go
to stderr. Exit codes: 0 ok/valid/embedded, 1 usage or I/O error, 2 invalid
metric, 3 obstructed, 4 inconclusive.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import lab, manifolds
from .errors import LooseEmbedError, MetricError, ParseError, StageFailure, UnsupportedModel
from .metric import (
    TOL_CLASS,
    TOL_METRIC,
    FiniteMetricSpace,
    classify_distances,
    dumps,
    loads,
    parse_point_cloud,
    space_from_points,
)
from .obstruction import DEFAULT_BUDGET, certificate_to_dict, obstruct
from .solver import SolverConfig, outcome_to_dict, solve

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_OBSTRUCTED, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

log = logging.getLogger("looseembed")


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def emit(report: dict) -> None:
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _read_input(path: str, fmt: str, metric: str, tol_metric: float) -> FiniteMetricSpace:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    if fmt == "auto":
        fmt = "csv" if path.lower().endswith(".csv") else "doc"
    if fmt == "csv":
        labels, coords = parse_point_cloud(text)
        return space_from_points(coords, labels, metric, tol_metric)
    return loads(text, tol_metric)


def _violation_dict(err: MetricError) -> dict:
    d = {"type": type(err).__name__, "message": str(err)}
    for k in ("i", "j", "k"):
        if hasattr(err, k):
            d[k] = getattr(err, k)
    return d


def _load(args, report):
    """Read and validate the input; returns (space, None) or (None, exit code)."""
    try:
        return _read_input(args.path, args.input_format, args.metric, args.tol_metric), None
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return None, EXIT_USAGE
    except MetricError as exc:
        report["valid"] = False
        report["violations"] = [_violation_dict(e) for e in exc.violations]
        emit(report)
        return None, EXIT_INVALID


def cmd_validate(args) -> int:
    report = {"command": "validate", "parameters": {"path": args.path, "tol_metric": args.tol_metric}}
    space, code = _load(args, report)
    if space is None:
        return code
    report.update(valid=True, points=space.n, exact=space.exact, labels=list(space.labels))
    emit(report)
    return EXIT_OK


def cmd_obstruct(args) -> int:
    params = {"path": args.path, "tol_metric": args.tol_metric, "tol_class": args.tol_class,
              "budget": args.budget, "threads": args.threads}
    report = {"command": "obstruct", "parameters": params}
    space, code = _load(args, report)
    if space is None:
        return code
    cls = classify_distances(space, args.tol_class)
    rep = obstruct(cls, args.budget)
    report.update(points=space.n, classes=cls.num_classes, **certificate_to_dict(rep, cls))
    emit(report)
    return EXIT_OK


def _solver_config(args) -> SolverConfig:
    return SolverConfig(restarts=args.restarts, max_iterations=args.max_iterations,
                        margin=args.margin, rng_seed=args.seed, tol_eq=args.tol_eq,
                        tol_sep=args.tol_sep, tol_class=args.tol_class, budget=args.budget)


def _config_params(cfg: SolverConfig) -> dict:
    return {"restarts": cfg.restarts, "max_iterations": cfg.max_iterations, "margin": cfg.margin,
            "seed": cfg.rng_seed, "tol_eq": cfg.tol_eq, "tol_sep": cfg.tol_sep,
            "tol_class": cfg.tol_class, "budget": cfg.budget, "armijo": cfg.armijo,
            "shrink": cfg.shrink, "grad_tol": cfg.grad_tol}


def cmd_embed(args) -> int:
    cfg = _solver_config(args)
    params = {"path": args.path, "dim": args.dim, "tol_metric": args.tol_metric,
              "threads": args.threads, **_config_params(cfg)}
    report = {"command": "embed", "parameters": params}
    space, code = _load(args, report)
    if space is None:
        return code
    if args.dim < 1:
        print("error: --dim must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    outcome = solve(space, args.dim, cfg)
    report.update(outcome_to_dict(outcome, space, args.tol_class))
    emit(report)
    return outcome.exit_code


def _model(args):
    periods = tuple(float(x) for x in args.periods.split(","))
    return manifolds.make_model(args.model, args.radius, periods, args.mesh)


def _points_json(points):
    if isinstance(points, list) and points and isinstance(points[0], manifolds.MeshPoint):
        return [[p.face, list(p.bary)] for p in points]
    return np.asarray(points).tolist()


def cmd_manifold(args) -> int:
    try:
        model = _model(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    params = {"seed": args.seed, **manifolds.model_to_dict(model)}
    sub = args.subcommand
    report = {"command": f"manifold {sub}", "parameters": params}
    try:
        if sub == "sample":
            params["n"] = args.n
            points, space = manifolds.sample(model, args.n, args.seed)
            if args.json:
                report.update(points=_points_json(points), distances=space.dist)
                emit(report)
            else:
                desc = " ".join(f"{k}={v}" for k, v in sorted(params.items()))
                sys.stdout.write(dumps(space, [f"manifold sample {desc}"]))
            return EXIT_OK
        if sub in ("search-simplex", "search-flag"):
            kind = "simplex" if sub == "search-simplex" else "flag"
            size = args.k if kind == "simplex" else args.n
            params.update(kind=kind, size=size, restarts=args.restarts, min_step=args.min_step,
                          max_evals=args.max_evals)
            res = lab.best_structure(model, kind, size, args.restarts, args.seed,
                                     args.min_step, args.max_evals, args.threads)
            cfg = res.configuration
            pts = cfg if kind == "simplex" else [x for pq in cfg for x in pq]
            report.update(quality=res.quality, evaluations=res.evaluations,
                          configuration=_points_json(pts), restart_qualities=res.qualities)
            emit(report)
            return EXIT_OK
        if sub == "monotonicity":
            params.update(scale=args.scale, angle_bound=args.angle_bound, samples=args.samples,
                          m=args.m)
            report.update(lab.monotonicity_experiment(model, args.scale, args.angle_bound,
                                                      args.samples, args.m, args.seed))
            emit(report)
            return EXIT_OK
        if sub == "net-limit":
            chain = [int(c) for c in args.chain.split(",")]
            cfg = _solver_config(args)
            params.update(chain=chain, dim=args.dim, **_config_params(cfg))
            params["seed"] = args.seed
            try:
                report.update(lab.net_limit_experiment(model, chain, args.dim, cfg, args.seed))
            except StageFailure as exc:
                report.update(exc.report)
                emit(report)
                return exc.outcome.exit_code
            emit(report)
            return EXIT_OK
    except UnsupportedModel as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, LooseEmbedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


def _add_input(p):
    p.add_argument("path", help="metric-space document, CSV point cloud, or '-' for stdin")
    p.add_argument("--input-format", choices=("auto", "doc", "csv"), default="auto")
    p.add_argument("--metric", choices=("euclidean",), default="euclidean",
                   help="distance used for CSV point clouds")
    p.add_argument("--tol-metric", type=float, default=TOL_METRIC)


def _add_solver(p):
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--max-iterations", type=int, default=5000)
    p.add_argument("--margin", type=float, default=None, help="separation target delta")
    p.add_argument("--tol-eq", type=float, default=None)
    p.add_argument("--tol-sep", type=float, default=None)
    p.add_argument("--tol-class", type=float, default=TOL_CLASS)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="looseembed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the metric axioms")
    _add_input(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("obstruct", help="largest regular simplex, longest flag, dimension bound")
    _add_input(p)
    p.add_argument("--tol-class", type=float, default=TOL_CLASS)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_obstruct)

    p = sub.add_parser("embed", help="search for a loose embedding into R^N")
    _add_input(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    _add_solver(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("manifold", help="experiments on model manifolds")
    msub = p.add_subparsers(dest="subcommand", required=True)

    def model_parser(name, help):
        q = msub.add_parser(name, help=help)
        q.add_argument("--model", choices=("circle", "sphere", "torus", "mesh"), required=True)
        q.add_argument("--radius", type=float, default=1.0)
        q.add_argument("--periods", default="1,1", help="torus periods a,b")
        q.add_argument("--mesh", default=None, help="indexed triangle file (default: icosahedron)")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--threads", type=int, default=1)
        q.set_defaults(func=cmd_manifold)
        return q

    q = model_parser("sample", "sample points; prints a metric-space document")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--json", action="store_true", help="JSON report with coordinates instead")

    for name, size_flag in (("search-simplex", "--k"), ("search-flag", "--n")):
        q = model_parser(name, f"pattern search for a near-{name.split('-')[1]}")
        q.add_argument(size_flag, type=int, required=True)
        q.add_argument("--restarts", type=int, default=20)
        q.add_argument("--min-step", type=float, default=1e-11)
        q.add_argument("--max-evals", type=int, default=20_000)

    q = model_parser("monotonicity", "median residual along nearly parallel geodesics")
    q.add_argument("--scale", type=float, default=0.01)
    q.add_argument("--angle-bound", type=float, default=0.1)
    q.add_argument("--samples", type=int, default=1000)
    q.add_argument("--m", type=int, default=100)

    q = model_parser("net-limit", "normalized embeddings of nested samples")
    q.add_argument("--chain", required=True, help="comma-separated increasing sizes")
    q.add_argument("--dim", type=int, required=True)
    _add_solver(q)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    code = args.func(args)
    print(f"wall time {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
