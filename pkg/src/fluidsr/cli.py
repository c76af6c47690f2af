"""Command-line front end for the experiment pipelines.

Stage commands (gen-data through super-resolve) run the pipeline prefix
ending at their stage and always reuse completed work recorded under
the same config hash; the full runs (run-snapshot, run-trajectory)
recompute unless --resume is given.  Exit codes: 0 success, 2 for
configuration problems, 3 when a pipeline stage fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .debias import verify_propositions
from .fldio import read_field
from .pipeline import StageError, evaluate, run_snapshot_pipeline, \
    run_trajectory_pipeline, run_until
from .schedule import NoiseSchedule

_STAGE_TARGETS = {
    "gen-data": "data",
    "train-score": "score-hflr",
    "train-sr": "cascade",
    "train-fno": "fno",
    "search-t": "search",
    "translate": "translate",
    "super-resolve": "super-resolve",
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment JSON document")
    p.add_argument("--seed", type=int, default=None,
                   help="override the master seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--dry-run", action="store_true",
                   help="validate the config and print the stage plan")
    p.add_argument("--resume", action="store_true",
                   help="reuse stages completed under the same config hash")
    p.add_argument("--baselines", action="store_true",
                   help="also translate with the ddib, sdedit and ot "
                        "baselines and report them")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluidsr",
        description="unpaired super-resolution of coarse fluid simulations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("gen-data", "generate or validate the dataset bundle"),
        ("train-score", "train both unconditional score models"),
        ("train-sr", "train the super-resolution cascade"),
        ("train-fno", "train the trajectory operator (trajectory configs)"),
        ("search-t", "grid-search the translation time pair"),
        ("translate", "translate the test set toward high fidelity"),
        ("super-resolve", "upsample the translated set through the cascade"),
        ("run-snapshot", "run the full snapshot pipeline and report"),
        ("run-trajectory", "run the full trajectory pipeline and report"),
    ]:
        _add_run_flags(sub.add_parser(name, help=helptext))

    ev = sub.add_parser("evaluate", help="compare a stored prediction set "
                        "against references")
    ev.add_argument("--pred", required=True, help="prediction field file")
    ev.add_argument("--ref", required=True, help="reference field file")
    ev.add_argument("--out", default=None, help="directory for the report")
    ev.add_argument("--label", default="pred", help="method name in tables")
    ev.add_argument("--mmd-bandwidth", type=float, default=0.01)

    vp = sub.add_parser("verify-props", help="closed-form checks of the "
                        "translation's distribution identity and transport "
                        "bound on 1-D Gaussians")
    vp.add_argument("--source-mean", type=float, default=2.0)
    vp.add_argument("--source-std", type=float, default=1.0)
    vp.add_argument("--target-mean", type=float, default=0.0)
    vp.add_argument("--target-std", type=float, default=1.0)
    vp.add_argument("--grid", type=int, default=10,
                    help="time-grid points per axis over (0, 1]")
    vp.add_argument("--beta0", type=float, default=0.1)
    vp.add_argument("--beta1", type=float, default=20.0)
    vp.add_argument("--out", default=None, help="directory for the CSV")
    return parser


def _cmd_pipeline(args) -> int:
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
    if args.baselines and not cfg.baselines:
        from dataclasses import replace
        cfg = replace(cfg, baselines=True)
    if args.command == "run-snapshot":
        report = run_snapshot_pipeline(cfg, resume=args.resume,
                                       dry_run=args.dry_run)
    elif args.command == "run-trajectory":
        report = run_trajectory_pipeline(cfg, resume=args.resume,
                                         dry_run=args.dry_run)
    else:
        report = run_until(cfg, _STAGE_TARGETS[args.command],
                           dry_run=args.dry_run)
    if not args.dry_run and args.command.startswith("run-"):
        print(f"report written to {Path(cfg.out_dir) / 'report'}")
        for method in sorted(report.tables):
            row = report.tables[method]
            cells = ", ".join(f"{k}={row[k]:.4g}" for k in ("rmse", "melrw")
                              if isinstance(row.get(k), float))
            print(f"  {method:<10} vs {row['reference']}: {cells}")
    return 0


def _cmd_evaluate(args) -> int:
    try:
        pred = read_field(args.pred)
        ref = read_field(args.ref)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        report = evaluate(pred, ref, mmd_bandwidth=args.mmd_bandwidth,
                          label=args.label, out_dir=args.out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps(report.to_dict()["tables"], indent=2, sort_keys=True))
    return 0


def _cmd_verify_props(args) -> int:
    if args.grid < 1:
        raise ConfigError("grid must have at least one point")
    try:
        schedule = NoiseSchedule(beta0=args.beta0, beta1=args.beta1)
        import numpy as np
        ts = (np.arange(args.grid) + 1.0) / args.grid
        report = verify_propositions(args.source_mean, args.source_std,
                                     args.target_mean, args.target_std,
                                     schedule, t1_values=ts, t2_values=ts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.write_csv(out / "propositions.csv")
    print(f"max kl discrepancy: {report.max_kl_discrepancy:.3e}")
    print(f"max transport-bound ratio: {report.max_prop2_ratio:.12f}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "verify-props":
            return _cmd_verify_props(args)
        return _cmd_pipeline(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
