"""Command-line entry points: train, grid, dp-baseline, evaluate, report."""

from __future__ import annotations

import argparse
import sys

from . import harness


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file (defaults apply otherwise)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted config override, e.g. env.arrival_rate=0.05 (repeatable)",
    )


def _load_cfg(args) -> harness.ExperimentConfig:
    return harness.load_config(args.config, tuple(args.overrides))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="queuectl",
        description="Train and benchmark service-rate controllers for an M/M/1 queue.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training trial")
    p_train.add_argument("--algo", required=True, choices=harness.ALGORITHMS)
    p_train.add_argument("--state", required=True, choices=["q", "qq"])
    p_train.add_argument("--seed", required=True, type=int)
    p_train.add_argument("--out", help="output directory (default $QUEUECTL_OUT or ./runs)")
    _add_config_args(p_train)

    p_grid = sub.add_parser("grid", help="run the full algorithm x state x seed grid")
    p_grid.add_argument("--out", help="output directory (default $QUEUECTL_OUT or ./runs)")
    p_grid.add_argument("--workers", type=int, help="worker processes (default: logical cores)")
    _add_config_args(p_grid)

    p_dp = sub.add_parser("dp-baseline", help="solve and report the optimal threshold policy")
    p_dp.add_argument("--out", help="also write dp_baseline.csv to this directory")
    _add_config_args(p_dp)

    p_eval = sub.add_parser("evaluate", help="score a saved policy checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", required=True, type=int)
    _add_config_args(p_eval)

    p_report = sub.add_parser("report", help="aggregate table and figure-input CSVs")
    p_report.add_argument("--in", dest="in_dir", required=True)

    args = parser.parse_args(argv)

    if args.command == "train":
        cfg = _load_cfg(args)
        out = harness.resolve_out_dir(args.out)
        art = harness.run_trial(cfg, args.algo, args.state, args.seed, out)
        print(f"trial written to {art.trial_dir}")
        print(f"  epochs {art.epochs_run}, updates {art.updates_run}")
        if art.diverged_at is not None:
            print(f"  DIVERGED at update {art.diverged_at}")
        print(f"  updates to target: {art.u_eta if art.u_eta is not None else 'not reached'}")
        print(f"  samples to target: {art.n_eta if art.n_eta is not None else 'not reached'}")
        print(f"  final reward per epoch {art.q_pi_per_epoch!r} (per time {art.q_pi_per_time!r})")
        return 0

    if args.command == "grid":
        cfg = _load_cfg(args)
        out = harness.resolve_out_dir(args.out)
        summary = harness.run_grid(cfg, out, args.workers)
        print(f"summary written to {summary}")
        return 0

    if args.command == "dp-baseline":
        cfg = _load_cfg(args)
        print(harness.dp_baseline_report(cfg, args.out))
        return 0

    if args.command == "evaluate":
        cfg = _load_cfg(args)
        quality = harness.evaluate_checkpoint(args.checkpoint, args.episodes, cfg)
        print(f"episodes: {quality.episodes}")
        print(f"reward per epoch: {quality.per_epoch!r} (std {quality.std!r})")
        print(f"reward per time:  {quality.per_time!r}")
        return 0

    if args.command == "report":
        try:
            print(harness.report(args.in_dir))
        except harness.ReportError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
