"""Command-line interface.

Subcommands map onto the harness and protocol operations: ``simulate`` runs
one synthetic distributed round end to end, ``mse-table`` / ``sweeps`` /
``initials`` / ``normality`` / ``rate`` drive the Monte Carlo harness,
``analyze`` runs the real-CSV comparison, and ``worker`` / ``coordinate`` are
the process modes behind the stdio transport.  On failure a machine-readable
``{"error": ..., "message": ...}`` object is written to stderr and the exit
code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

from .aggregate import InitialStrategy, WeightMode, aggregate_reports
from .errors import SpikeShardError
from .experiments import (
    ExperimentConfig,
    rate_check,
    run_initials,
    run_mse_grid,
    run_normality,
    run_sweeps,
    write_cells_csv,
    write_initials_csv,
    write_normality_csv,
    write_rate_csv,
)
from .ingest import analyze_real, load_csv, write_real_csv
from .localnode import MomentMode
from .protocol import (
    ReportStatus,
    RoundConfig,
    compute_message,
    decode_report,
    encode_report,
    estimate_from_message,
    run_round,
)
from .sampler import load_dataset_csv, make_partition, sample_local
from .spectrum import SpikeSide

_FULL_SCALE = {
    "p_grid": (100, 200, 300),
    "m_grid": (50, 100, 150, 200, 250, 300),
    "reps": 1000,
}


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _load_config(args, overrides: dict) -> ExperimentConfig:
    raw = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            raw = json.load(fh)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "full", False):
        raw.update(_FULL_SCALE)
    return ExperimentConfig.from_dict(raw)


def _emit(args, writer, payload=None) -> int:
    if args.out:
        writer(args.out)
    else:
        writer(sys.stdout)
    if payload is not None:
        print(json.dumps(payload))
    return 0


def _cmd_simulate(args) -> int:
    config = _load_config(args, {"alpha": args.alpha, "seed": args.seed})
    p = args.p or config.p_grid[0]
    m = args.m or config.m_grid[0]
    plan = make_partition(p, m, config.partition, seed=config.seed)
    model = config.model(p)
    shards = [
        sample_local(model, size, config.seed, worker_id=worker)
        for worker, size in enumerate(plan.sizes)
    ]
    round_config = RoundConfig(
        side=config.side,
        moment_mode=config.moment_mode,
        weight_mode=config.weight_mode,
        initial=config.initial,
    )
    result, stats = run_round(shards, round_config, transport=args.transport)
    payload = {
        "p": p,
        "m": m,
        "alpha_true": config.alpha,
        "result": result.to_dict(),
        "transport": {
            "messages_sent": stats.messages_sent,
            "scalars_sent": stats.scalars_sent,
            "rounds": stats.rounds,
        },
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_mse_table(args) -> int:
    config = _load_config(
        args,
        {
            "alpha": args.alpha,
            "p_grid": _ints(args.p_grid) if args.p_grid else None,
            "m_grid": _ints(args.m_grid) if args.m_grid else None,
            "reps": args.reps,
            "seed": args.seed,
        },
    )
    cells = run_mse_grid(config)
    return _emit(args, lambda dst: write_cells_csv(cells, dst))


def _cmd_sweeps(args) -> int:
    config = _load_config(
        args,
        {
            "alpha": args.alpha,
            "p_grid": _ints(args.p_grid) if args.p_grid else None,
            "m_grid": _ints(args.m_grid) if args.m_grid else None,
            "reps": args.reps,
            "seed": args.seed,
        },
    )
    cells = run_sweeps(config)
    return _emit(args, lambda dst: write_cells_csv(cells, dst))


def _cmd_initials(args) -> int:
    config = _load_config(
        args,
        {
            "alpha": args.alpha,
            "p_grid": _ints(args.p_grid) if args.p_grid else None,
            "m_grid": _ints(args.m_grid) if args.m_grid else None,
            "reps": args.reps,
            "seed": args.seed,
        },
    )
    cells = run_initials(config)
    return _emit(args, lambda dst: write_initials_csv(cells, dst))


def _cmd_normality(args) -> int:
    config = _load_config(
        args,
        {
            "alpha": args.alpha,
            "p_grid": _ints(args.p_grid) if args.p_grid else None,
            "m_grid": _ints(args.m_grid) if args.m_grid else None,
            "reps": args.reps,
            "seed": args.seed,
        },
    )
    result = run_normality(config, bins=args.bins)
    if not args.out or not args.bins_out:
        raise SystemExit("normality needs --out (raw z) and --bins-out (histogram)")
    write_normality_csv(result, args.out, args.bins_out)
    print(
        json.dumps(
            {
                "ks_distance": result.ks_distance,
                "mean": result.mean,
                "std": result.std,
                "count": int(result.z.size),
            }
        )
    )
    return 0


def _cmd_rate(args) -> int:
    config = _load_config(
        args,
        {
            "alpha": args.alpha,
            "p_grid": _ints(args.p_grid) if args.p_grid else None,
            "m_grid": _ints(args.m_grid) if args.m_grid else None,
            "n_totals": _ints(args.n_totals) if args.n_totals else None,
            "reps": args.reps,
            "seed": args.seed,
        },
    )
    result = rate_check(config)
    code = _emit(args, lambda dst: write_rate_csv(result, dst))
    print(json.dumps({"slope": result.slope}))
    return code


def _cmd_analyze(args) -> int:
    table = load_csv(args.data, has_header=not args.no_header, standardize=not args.no_standardize)
    cells = analyze_real(table, _ints(args.m_grid), seed=args.seed or 0)
    return _emit(args, lambda dst: write_real_csv(cells, dst))


def _cmd_worker(args) -> int:
    dataset = load_dataset_csv(args.data, worker_id=args.worker_id, raw_path=args.raw)
    config = RoundConfig(
        k=args.spike_rank,
        side=SpikeSide(args.side),
        n_spikes=args.n_spikes,
        moment_mode=MomentMode(args.moment_mode),
        ipr_variant=args.ipr_variant,
    )
    # a worker always emits exactly one line; pipeline failures become status codes
    print(encode_report(compute_message(dataset, config)))
    return 0


def _cmd_coordinate(args) -> int:
    source = open(args.input) if args.input else sys.stdin
    try:
        lines = [line.strip() for line in source if line.strip()]
    finally:
        if args.input:
            source.close()
    messages = [decode_report(line) for line in lines]
    estimates, excluded = [], []
    for message in messages:
        if message.status in (ReportStatus.OK, ReportStatus.BOUNDARY):
            estimates.append(estimate_from_message(message))
        else:
            excluded.append(message.worker_id)
    result = aggregate_reports(
        estimates,
        p=args.p,
        weight_mode=WeightMode(args.weight_mode),
        initial=InitialStrategy(args.initial),
        excluded=tuple(excluded),
    )
    text = json.dumps(result.to_dict())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _add_grid_flags(sub) -> None:
    sub.add_argument("--config", help="JSON config mirroring ExperimentConfig fields")
    sub.add_argument("--alpha", type=float, default=None)
    sub.add_argument("--p-grid", default=None, help="comma-separated dimensions")
    sub.add_argument("--m-grid", default=None, help="comma-separated machine counts")
    sub.add_argument("--reps", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikeshard",
        description="Distributed spiked-eigenvalue estimation toolkit",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="run one synthetic distributed round")
    sim.add_argument("--config", default=None)
    sim.add_argument("--p", type=int, default=None)
    sim.add_argument("--m", type=int, default=None)
    sim.add_argument("--alpha", type=float, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--transport", choices=("inprocess", "stdio", "tcp"), default="inprocess")
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=_cmd_simulate)

    table = commands.add_parser("mse-table", help="pooled/weighted/average MSE grid")
    _add_grid_flags(table)
    table.add_argument("--full", action="store_true", help="full-scale grids (long-running)")
    table.set_defaults(func=_cmd_mse_table)

    sweeps = commands.add_parser("sweeps", help="sweep m at fixed p (or vice versa)")
    _add_grid_flags(sweeps)
    sweeps.set_defaults(func=_cmd_sweeps)

    initials = commands.add_parser("initials", help="initial-value strategy comparison")
    _add_grid_flags(initials)
    initials.set_defaults(func=_cmd_initials)

    normality = commands.add_parser("normality", help="standardized-statistic normality check")
    _add_grid_flags(normality)
    normality.add_argument("--bins", type=int, default=40)
    normality.add_argument("--bins-out", default=None, help="histogram CSV path")
    normality.set_defaults(func=_cmd_normality)

    rate = commands.add_parser("rate", help="MSE decay rate in total sample size")
    _add_grid_flags(rate)
    rate.add_argument("--n-totals", default=None, help="comma-separated total sizes")
    rate.set_defaults(func=_cmd_rate)

    analyze = commands.add_parser("analyze", help="pooled/weighted/average on a real CSV")
    analyze.add_argument("--data", required=True)
    analyze.add_argument("--m-grid", required=True)
    analyze.add_argument("--no-header", action="store_true")
    analyze.add_argument("--no-standardize", action="store_true")
    analyze.add_argument("--seed", type=int, default=None)
    analyze.add_argument("--out", default=None)
    analyze.set_defaults(func=_cmd_analyze)

    worker = commands.add_parser("worker", help="read one shard CSV, print one report line")
    worker.add_argument("--data", required=True)
    worker.add_argument("--raw", default=None, help="pre-rotation entries CSV (empirical moments)")
    worker.add_argument("--worker-id", type=int, default=0)
    worker.add_argument("--spike-rank", type=int, default=1)
    worker.add_argument("--side", choices=("upper", "lower"), default="upper")
    worker.add_argument("--n-spikes", type=int, default=1)
    worker.add_argument("--moment-mode", choices=("gaussian", "empirical"), default="gaussian")
    worker.add_argument("--ipr-variant", choices=("v_k", "v_t"), default="v_k")
    worker.set_defaults(func=_cmd_worker)

    coordinate = commands.add_parser("coordinate", help="aggregate report lines into one result")
    coordinate.add_argument("--p", type=int, required=True)
    coordinate.add_argument("--weight-mode", choices=("gaussian", "estimated", "uniform"), default="gaussian")
    coordinate.add_argument("--initial", choices=("mean", "first"), default="mean")
    coordinate.add_argument("--input", default=None, help="report lines file (default stdin)")
    coordinate.add_argument("--out", default=None)
    coordinate.set_defaults(func=_cmd_coordinate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpikeShardError, OSError, ValueError) as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
