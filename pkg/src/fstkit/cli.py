"""Command-line interface.

Subcommands: crashmap, oracle, synth, eval, baseline, experiment, report.
Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import harness
from .baselines import cmc_sample, rqmc_sample
from .cutin_sim import crash_map_to_csv
from .fst_estimator import partition, partition_to_csv
from .fst_optimizer import OptimizerConfig, synthesize
from .scenario_space import ConfigError


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="config JSON layered over the packaged defaults")
    parser.add_argument("--seed", type=int, metavar="U64", help="seed override")
    parser.add_argument("--out", metavar="PATH", help="output file (stdout when omitted)")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _world(args) -> harness.World:
    return harness.build_world(harness.load_config(args.config))


def _objective_dict(report) -> dict:
    return {
        "total_j": report.total_j,
        "worst_gap": report.worst_gap,
        "penalty": report.penalty,
        "w_m": "INF" if math.isinf(report.w_m) else report.w_m,
        "per_vertex_gap": list(report.per_vertex_gap),
    }


def cmd_crashmap(args) -> int:
    world = _world(args)
    cmap = world.crash_map(args.model)
    if args.out is None:
        sys.stdout.write("r,rdot,p_crash\n")
        for r, rd, p in zip(world.grid.cell_r, world.grid.cell_rdot, cmap.values):
            sys.stdout.write(f"{r:.17g},{rd:.17g},{p:.17g}\n")
    else:
        crash_map_to_csv(cmap, args.out)
    return 0


def cmd_oracle(args) -> int:
    world = _world(args)
    names = ["av", *world.vertex_params] if args.model == "all" else [args.model]
    rates = {name: harness.oracle_mu(world, name) for name in names}
    _emit(json.dumps(rates, indent=2), args.out)
    return 0


def cmd_synth(args) -> int:
    world = _world(args)
    opt = world.optimizer
    w_m = harness._parse_w_m(args.w_m if args.w_m is not None else opt.get("w_m", 1.0))
    cfg = OptimizerConfig(
        n=args.n,
        restarts=args.restarts if args.restarts is not None else int(opt.get("restarts", 8)),
        max_iters=int(opt.get("max_iters", 200)),
        init_step=float(opt.get("init_step", 0.5)),
        min_step=float(opt.get("min_step", 0.0028)),
        seed=args.seed if args.seed is not None else 0,
        w_m=w_m,
    )
    trace: list | None = [] if args.trace else None
    ts, report = synthesize(cfg, world.surrogate_set(), world.pmf, world.grid, trace=trace)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("iter,restart,total_j,worst_gap,penalty,step\n")
            for it, restart, total, worst, pen, step in trace:
                fh.write(f"{it},{restart},{total:.17g},{worst:.17g},{pen:.17g},{step:.17g}\n")
    if args.partition_csv:
        partition_to_csv(partition(ts, world.grid, world.pmf), world.grid, args.partition_csv)
    if args.out is None:
        payload = {
            "method": "FST",
            "n": ts.n,
            "points": [{"r": float(r), "rdot": float(rd)} for r, rd in ts.points],
            "weights": None,
            "seed": cfg.seed,
            "objective": _objective_dict(report),
            "config_hash": world.hash,
        }
        _emit(json.dumps(payload, indent=2), None)
    else:
        harness.write_testset_json(
            args.out,
            "FST",
            ts.points,
            seed=cfg.seed,
            objective=_objective_dict(report),
            cfg_hash=world.hash,
        )
    return 0


def cmd_eval(args) -> int:
    world = _world(args)
    payload = harness.read_testset_json(args.testset)
    stored_hash = payload.get("config_hash")
    if stored_hash is not None and stored_hash != world.hash:
        sys.stderr.write("warning: test set was synthesized under a different config\n")
    result = harness.evaluate_testset(world, payload, model=args.model)
    _emit(json.dumps(result, indent=2), args.out)
    return 0


def cmd_baseline(args) -> int:
    world = _world(args)
    seed = args.seed if args.seed is not None else 0
    sampler = cmc_sample if args.method == "CMC" else rqmc_sample
    draw = sampler(args.n, world.pmf, world.grid, seed)
    if args.out is None:
        payload = {
            "method": draw.method,
            "n": args.n,
            "points": [{"r": float(r), "rdot": float(rd)} for r, rd in draw.points],
            "weights": [float(w) for w in draw.weights],
            "seed": seed,
            "objective": None,
            "config_hash": world.hash,
        }
        _emit(json.dumps(payload, indent=2), None)
    else:
        harness.write_testset_json(
            args.out, draw.method, draw.points, weights=draw.weights, seed=seed, cfg_hash=world.hash
        )
    return 0


def cmd_experiment(args) -> int:
    world = _world(args)
    records = harness.run_experiment(world, base_seed=args.seed)
    if args.out is not None:
        harness.write_records_csv(records, args.out)
    summary = harness.summarize(records)
    sys.stdout.write(harness.format_summary_table(summary) + "\n")
    if args.summary is not None:
        with open(args.summary, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_report(args) -> int:
    records = harness.read_records_csv(args.csv)
    summary = harness.summarize(records)
    sys.stdout.write(harness.format_summary_table(summary) + "\n")
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fstkit",
        description="Synthesize small scenario test sets and benchmark them against Monte Carlo baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("crashmap", help="simulate a model over the full grid, emit r,rdot,p_crash CSV")
    _common(p)
    p.add_argument("--model", default="av", help="model name from the config (default av)")
    p.set_defaults(func=cmd_crashmap)

    p = sub.add_parser("oracle", help="full-grid ground-truth crash rate per model")
    _common(p)
    p.add_argument("--model", default="all", help="model name, or 'all' (default)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("synth", help="synthesize an n-point test set")
    _common(p)
    p.add_argument("--n", type=int, required=True, help="test-set size")
    p.add_argument("--restarts", type=int, help="override optimizer restarts")
    p.add_argument("--w-m", dest="w_m", help="confidence weight, a number or INF")
    p.add_argument("--trace", metavar="PATH", help="write per-acceptance trace CSV")
    p.add_argument("--partition-csv", metavar="PATH", help="write the coverage partition CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="evaluate a stored test set against a configured model")
    _common(p)
    p.add_argument("--testset", required=True, metavar="PATH")
    p.add_argument("--model", default="av")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="draw a CMC or RQMC baseline test set")
    _common(p)
    p.add_argument("--method", choices=("CMC", "RQMC"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("experiment", help="run the repeated-trial method comparison")
    _common(p)
    p.add_argument("--summary", metavar="PATH", help="also write the summary JSON here")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="aggregate a trial CSV into the summary table")
    _common(p)
    p.add_argument("csv", help="trial records CSV from 'experiment'")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(f"error: {exc}\n")
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
