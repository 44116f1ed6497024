"""Command-line interface.

Subcommands:
    discretize    build a case and export cloud + operator files
    optimize      run one placement selector, write the placement JSON
    reconstruct   evaluate reconstructors for one placement file
    benchmark     run a full experiment grid from a config file
    verify-bounds empirical error-bound check, emits a JSON report

Exit codes: 0 success, 2 configuration/usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .cases import build_cloud, build_operator, case_by_name
from .cloud import save_cloud_csv
from .criterion import FitnessContext, verify_bounds
from .errors import ConfigError, HeatsenseError
from .harness import (
    ExperimentConfig,
    load_config,
    prepare_data,
    run_experiment,
    select_placement,
    train_reconstructors,
    reconstruct_scenario,
)
from .rbffd import export_operator, load_operator
from .reconstruct import metrics
from .system import (
    NoiseModel,
    Placement,
    apply_noise,
    consistent_system,
    load_placement,
    save_placement,
)


def _add_case_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True, choices=("heat1d", "plate2d"))
    p.add_argument("--n", type=int, help="1D point count override")
    p.add_argument("--nx", type=int, help="2D grid columns override")
    p.add_argument("--ny", type=int, help="2D grid rows override")
    p.add_argument("--m", type=int, help="stencil size override")


def _case_from_args(args) -> object:
    overrides = {}
    if args.case == "heat1d" and args.n:
        overrides["n"] = args.n
    if args.case == "plate2d":
        if args.nx:
            overrides["nx"] = args.nx
        if args.ny:
            overrides["ny"] = args.ny
    if args.m:
        overrides["m"] = args.m
    return case_by_name(args.case, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatsense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="export cloud and operator files")
    _add_case_args(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("optimize", help="select sensor locations")
    _add_case_args(p)
    p.add_argument("--method", required=True, choices=("pspo", "rs", "us", "cns", "ecs"))
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--population", type=int, help="GA population size")
    p.add_argument("--generations", type=int, help="GA generations")
    p.add_argument("--train-samples", type=int, help="snapshot count for cns/ecs")
    p.add_argument("--out", help="placement JSON path")

    p = sub.add_parser("reconstruct", help="evaluate one placement")
    _add_case_args(p)
    p.add_argument("--placement", required=True, help="placement JSON path")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--reconstructor",
        action="append",
        choices=("physics", "gappy_pod", "pod_nn", "mlp"),
        help="repeatable; defaults to physics and gappy_pod",
    )
    p.add_argument("--out", help="metrics JSON path")

    p = sub.add_parser("benchmark", help="run a config-driven experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--out", help="output directory override")

    p = sub.add_parser("verify-bounds", help="empirical error-bound report")
    _add_case_args(p)
    p.add_argument("--operator", help="load an exported operator directory instead of assembling")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--scale", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--out", help="report JSON path")
    return parser


def _cmd_discretize(args) -> int:
    case = _case_from_args(args)
    cloud = build_cloud(case)
    op = build_operator(case, cloud)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_cloud_csv(cloud, out / "cloud.csv")
    export_operator(op, out)
    print(f"wrote cloud ({cloud.n} points) and operator (l={op.l}) to {out}")
    return 0


def _cmd_optimize(args) -> int:
    case = _case_from_args(args)
    cfg = ExperimentConfig(
        case=case,
        methods=(args.method,),
        ks=(args.k,),
        gamma=args.gamma,
        master_seed=args.seed,
        ga_population=args.population,
        ga_generations=args.generations,
        n_train=args.train_samples,
    )
    data = prepare_data(cfg)
    placement = select_placement(cfg, data, args.method, args.k)
    fitness = data.ctx.fitness(placement.indices)
    out = args.out or f"placement_{args.method}_k{args.k}.json"
    save_placement(placement, out, fitness, args.gamma, args.seed)
    print(f"method={args.method} k={args.k} log10_kappa={fitness:.6f}")
    print(f"indices: {sorted(placement.indices)}")
    print(f"wrote {out}")
    return 0


def _cmd_reconstruct(args) -> int:
    case = _case_from_args(args)
    placement, meta = load_placement(args.placement)
    recons = tuple(args.reconstructor or ("physics", "gappy_pod"))
    cfg = ExperimentConfig(
        case=case,
        methods=("us",),
        ks=(placement.k,),
        sigmas=(args.sigma,),
        reconstructors=recons,
        gamma=meta.get("gamma", 1.0),
        master_seed=args.seed,
    )
    data = prepare_data(cfg)
    bundle = train_reconstructors(cfg, data, placement, args.sigma, recons)
    nm = NoiseModel(args.sigma, args.seed)
    meas = apply_noise(data.u_ref[placement.as_array()], nm)
    fields = reconstruct_scenario(cfg, data, bundle, meas, recons)
    result = {name: asdict(metrics(f, data.u_ref)) for name, f in fields.items()}
    text = json.dumps(result, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _cmd_benchmark(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    if cfg.out_dir is None:
        raise ConfigError("no output directory: set [output] dir or pass --out")
    report = run_experiment(cfg)
    print(f"wrote {len(report.rows)} rows to {cfg.out_dir / 'report.csv'} (config {report.config_hash})")
    return 0


def _cmd_verify_bounds(args) -> int:
    if args.operator:
        op = load_operator(args.operator)
    else:
        case = _case_from_args(args)
        op = build_operator(case)
    rng = np.random.default_rng(args.seed)
    indices = rng.choice(op.n, size=args.k, replace=False)
    placement = Placement(tuple(int(i) for i in indices), op.n)
    lambdas = rng.uniform(0.0, 20.0, size=op.l)
    sys_, _ = consistent_system(op, placement, args.gamma, lambdas)
    report = verify_bounds(sys_, args.trials, args.scale, args.seed)
    payload = asdict(report)
    payload["gamma"] = args.gamma
    text = json.dumps(payload, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 1 if report.violations else 0


_COMMANDS = {
    "discretize": _cmd_discretize,
    "optimize": _cmd_optimize,
    "reconstruct": _cmd_reconstruct,
    "benchmark": _cmd_benchmark,
    "verify-bounds": _cmd_verify_bounds,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except HeatsenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
