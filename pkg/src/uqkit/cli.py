"""Command-line interface.

Subcommands: ``train`` (fit estimators, save checkpoints), ``eval``
(checkpoints + data -> prediction-record CSVs), ``experiment`` (full
train/evaluate/report run), ``sweep`` (inference-budget sweep), and
``report`` (re-emit tables/figures from a results directory).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from uqkit.config import load_config
from uqkit.estimators import load_estimator, save_estimator
from uqkit.records import from_arrays, write_records
from uqkit.report import emit_report, load_result, write_result
from uqkit.runner import (
    build_estimator,
    build_seed_data,
    run_experiment,
    run_sample_sweep,
)


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed]
    if getattr(args, "out", None) is not None:
        cfg.output_dir = args.out
    return cfg


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(Path(args.config)), args)
    out = Path(cfg.output_dir)
    for seed in cfg.seeds:
        train, _, _, _ = build_seed_data(cfg, seed)
        est = build_estimator(cfg, seed)
        est.fit(train.inputs, train.targets)
        target = out / cfg.estimator["kind"] / f"seed{seed}" / "checkpoint"
        save_estimator(est, target)
        print(f"seed {seed}: saved {target}")
    return 0


def cmd_eval(args) -> int:
    cfg = _apply_overrides(load_config(Path(args.config)), args)
    out = Path(cfg.output_dir)
    kind = cfg.estimator["kind"]
    for seed in cfg.seeds:
        ckpt = Path(args.checkpoints) / kind / f"seed{seed}" / "checkpoint"
        est = load_estimator(ckpt)
        _, id_test, ood_inputs, _ = build_seed_data(cfg, seed)
        pred_id, u_id = est.estimate(id_test.inputs)
        pred_ood, u_ood = est.estimate(ood_inputs)
        seed_dir = out / kind / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        write_records(from_arrays(pred_id, u_id, targets=id_test.targets,
                                  id_prefix="i"),
                      seed_dir / "records_id.csv")
        write_records(from_arrays(pred_ood, u_ood, targets=None, is_ood=True,
                                  id_prefix="o"),
                      seed_dir / "records_ood.csv")
        print(f"seed {seed}: wrote records under {seed_dir}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _apply_overrides(load_config(Path(args.config)), args)
    result = run_experiment(cfg, jobs=args.jobs)
    out = Path(cfg.output_dir)
    write_result(result, out)
    written = emit_report(result, args.format, out)
    for seed_result in result.per_seed:
        line = "  ".join(f"{k}={seed_result.metrics[k]:.4f}"
                         for k in ("accuracy_or_mae", "raulc", "roc_auc"))
        print(f"seed {seed_result.seed}: {line}")
    for seed, message in result.errors.items():
        print(f"seed {seed} FAILED: {message}", file=sys.stderr)
    print(f"wrote {', '.join(str(p) for p in written)}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(Path(args.config)), args)
    budgets = [int(b) for b in args.budgets.split(",")]
    rows = run_sample_sweep(cfg, budgets, jobs=args.jobs)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["budget,method,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std"]
    for budget, result in rows:
        write_result(result, Path(result.config.output_dir))
        roc = result.aggregate["roc_auc"]
        pr = result.aggregate["pr_auc"]
        lines.append(f"{budget},{result.method},{roc[0]!r},{roc[1]!r},"
                     f"{pr[0]!r},{pr[1]!r}")
    path = out / "sweep.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    return 0


def cmd_report(args) -> int:
    payload = load_result(args.results)
    out = args.out if args.out is not None else args.results
    written = emit_report(payload, args.format, out)
    print(f"wrote {', '.join(str(p) for p in written)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqkit",
        description="dual-pass uncertainty estimation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="config file path")
            p.add_argument("--seed", type=int, default=None,
                           help="override: run this single seed")
        p.add_argument("--out", default=None, help="output directory override")

    p = sub.add_parser("train", help="train estimators, save checkpoints")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints into record CSVs")
    common(p)
    p.add_argument("--checkpoints", required=True,
                   help="directory written by uqkit train")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("experiment", help="full experiment: train, eval, report")
    common(p)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel seed workers (processes)")
    p.add_argument("--format", default="csv,md",
                   help="report formats: csv, md, svg (comma-separated)")
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("sweep", help="inference-budget sweep")
    common(p)
    p.add_argument("--budgets", default="2,3,4,5",
                   help="comma-separated sample budgets")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("report", help="re-emit reports from a results dir")
    p.add_argument("--results", required=True, help="directory with result.json")
    p.add_argument("--out", default=None)
    p.add_argument("--format", default="csv,md,svg")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as err:  # noqa: BLE001 - single CLI diagnostic surface
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
