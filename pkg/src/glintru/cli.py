"""Command-line entry point.

Every subcommand prints a single JSON result object to stdout and logs
progress to stderr; exit codes are 0 on success, 1 on runtime failure,
2 on usage errors.  Report-style subcommands (bench/ablate/sweep) also
write CSV tables and matplotlib figures into --out-dir.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench as bench_mod
from . import config as config_mod
from . import data as data_mod
from . import report
from .evaluation import evaluate
from .model import ModelConfig
from .training import TrainConfig, load_checkpoint, save_checkpoint, train

SCHEMA = "glintru.result.v1"


def _emit(command, payload):
    out = {"schema": SCHEMA, "command": command}
    out.update(payload)
    print(json.dumps(out, sort_keys=True))


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _add_config_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    for key, typ in config_mod.ALL_KEYS.items():
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            p.add_argument(flag, type=lambda s: s.lower() in ("true", "1", "yes"),
                           metavar="BOOL", default=None)
        else:
            p.add_argument(flag, type=typ, default=None)


def _resolve_configs(args, vocab_size):
    file_values = config_mod.read_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in config_mod.ALL_KEYS}
    return config_mod.resolve(file_values, overrides, vocab_size)


def _load_dataset(args):
    ds = data_mod.ingest(args.data)
    _log(f"ingested {args.data}: {ds.num_users} users, {ds.num_items} items")
    return ds


def cmd_synth(args):
    ds = data_mod.synth_cyclic(args.items, args.users, args.seq_len, args.seed)
    payload = {"stats": ds.stats()}
    if args.out:
        data_mod.write_tsv(ds, args.out)
        payload["out"] = args.out
    _emit("synth", payload)
    return 0


def cmd_ingest(args):
    ds = _load_dataset(args)
    views = data_mod.leave_one_out_split(ds)
    payload = {"stats": ds.stats(), "split": views.manifest()}
    if args.split_manifest:
        with open(args.split_manifest, "w") as fh:
            json.dump({"stats": ds.stats(), "split": views.manifest()},
                      fh, sort_keys=True, indent=1)
        payload["split_manifest"] = args.split_manifest
    _emit("ingest", payload)
    return 0


def cmd_train(args):
    ds = _load_dataset(args)
    cfg, train_cfg = _resolve_configs(args, vocab_size=ds.num_items + 1)
    views = data_mod.leave_one_out_split(ds)
    params, log = train(cfg, train_cfg, views=views,
                        log_jsonl=args.log_out, quiet=False)
    if args.checkpoint_out:
        save_checkpoint(params, args.checkpoint_out, cfg)
    test = evaluate(params, cfg, views.test, k=train_cfg.eval_k,
                    batch_size=train_cfg.eval_batch_size)
    valid = evaluate(params, cfg, views.valid, k=train_cfg.eval_k,
                     batch_size=train_cfg.eval_batch_size)
    _emit("train", {
        "config": config_mod.echo(cfg, train_cfg),
        "epochs_run": len(log.epochs),
        "best_epoch": log.best_epoch,
        "stopped_early": log.stopped_early,
        "train_loss": [e.train_loss for e in log.epochs],
        "valid_metrics": valid.to_dict(),
        "test_metrics": test.to_dict(),
        "checkpoint": args.checkpoint_out,
    })
    return 0


def cmd_evaluate(args):
    ds = _load_dataset(args)
    cfg, train_cfg = _resolve_configs(args, vocab_size=ds.num_items + 1)
    params = load_checkpoint(args.checkpoint, cfg)
    views = data_mod.leave_one_out_split(ds)
    view = views.valid if args.split == "valid" else views.test
    metrics = evaluate(params, cfg, view, k=train_cfg.eval_k,
                       batch_size=train_cfg.eval_batch_size,
                       exclude_seen=not args.include_seen,
                       rank_dump=args.rank_dump)
    _emit("evaluate", {
        "config": config_mod.echo(cfg, train_cfg),
        "split": args.split,
        "metrics": metrics.to_dict(),
    })
    return 0


def cmd_bench(args):
    n_list = [int(s) for s in args.n_list.split(",")]
    components = args.components.split(",")
    os.makedirs(args.out_dir, exist_ok=True)
    by_component = {}
    slopes = {}
    for component in components:
        _log(f"timing {component} over N={n_list}")
        records = bench_mod.scaling_sweep(
            component, n_list, d=args.d, k=args.kernel, reps=args.reps,
            batch_size=args.batch, heads=args.heads, seed=args.seed)
        by_component[component] = records
        slopes[component] = bench_mod.loglog_slope(records)
    all_records = [r for rs in by_component.values() for r in rs]
    csv_path = os.path.join(args.out_dir, "scaling.csv")
    fig_path = os.path.join(args.out_dir, "scaling.png")
    bench_mod.write_csv(all_records, csv_path)
    report.scaling_figure(by_component, fig_path)
    _emit("bench", {
        "records": [r.to_dict() for r in all_records],
        "loglog_slopes": slopes,
        "csv": csv_path,
        "figure": fig_path,
    })
    return 0


def cmd_ablate(args):
    ds = _load_dataset(args)
    cfg, train_cfg = _resolve_configs(args, vocab_size=ds.num_items + 1)
    os.makedirs(args.out_dir, exist_ok=True)
    results = bench_mod.ablation_run(ds, cfg, train_cfg, k=train_cfg.eval_k,
                                     quiet=False)
    rows = []
    for r in results:
        row = {"variant": r.variant, "first_loss": r.first_loss,
               "last_loss": r.last_loss, "loss_drop": r.loss_drop,
               "median_forward_time": r.timing.median_time}
        row.update(r.metrics)
        rows.append(row)
    csv_path = os.path.join(args.out_dir, "ablation.csv")
    fig_path = os.path.join(args.out_dir, "ablation.png")
    bench_mod.write_csv(rows, csv_path)
    report.ablation_figure(results, fig_path)
    _emit("ablate", {
        "config": config_mod.echo(cfg, train_cfg),
        "results": rows,
        "csv": csv_path,
        "figure": fig_path,
    })
    return 0


def cmd_sweep(args):
    ds = _load_dataset(args)
    cfg, train_cfg = _resolve_configs(args, vocab_size=ds.num_items + 1)
    values = [int(s) for s in args.values.split(",")]
    os.makedirs(args.out_dir, exist_ok=True)
    rows = bench_mod.param_sweep(args.axis, values, ds, cfg, train_cfg,
                                 k=train_cfg.eval_k, quiet=False)
    csv_path = os.path.join(args.out_dir, f"sweep_{args.axis}.csv")
    fig_path = os.path.join(args.out_dir, f"sweep_{args.axis}.png")
    bench_mod.write_csv(rows, csv_path)
    report.sweep_figure(rows, fig_path)
    _emit("sweep", {
        "config": config_mod.echo(cfg, train_cfg),
        "rows": rows,
        "csv": csv_path,
        "figure": fig_path,
    })
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="glintru",
        description="Dense selective GRU + linear attention sequential recommender")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the cyclic-successor fixture")
    p.add_argument("--items", type=int, default=50)
    p.add_argument("--users", type=int, default=500)
    p.add_argument("--seq-len", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the dataset as TSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="read a TSV log and report statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--split-manifest", help="write split manifest JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train and report test metrics")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint-out", help="directory for the best checkpoint")
    p.add_argument("--log-out", help="per-epoch JSONL log path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["valid", "test"], default="test")
    p.add_argument("--include-seen", action="store_true",
                   help="rank seen items as candidates too")
    p.add_argument("--rank-dump", help="write per-user ranks as TSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="complexity-scaling timing sweep")
    p.add_argument("--components",
                   default="glint_layer,linear_attn,quadratic_attn")
    p.add_argument("--n-list", default="128,256,512,1024")
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="bench_out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="train/evaluate the component variants")
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", default="ablation_out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="hyperparameter grid over k, d, or L")
    p.add_argument("--data", required=True)
    p.add_argument("--axis", choices=["k", "d", "L"], required=True)
    p.add_argument("--values", required=True, help="comma-separated grid")
    p.add_argument("--out-dir", default="sweep_out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # runtime failure -> exit 1, usage already 2
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
