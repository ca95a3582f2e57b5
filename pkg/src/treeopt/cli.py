"""Command-line front end: train, predict, eval, inspect, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.
``DTREE_THREADS`` caps the bench worker count (0 = one worker per CPU,
unset = sequential).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bench import TrainingError
from .dataset import DataError, load_csv, load_feature_csv, load_libsvm, MinMaxScaler
from .tree import ModelFormatError, deserialize, export_rules, serialize


def _split_csv_list(text: str) -> tuple[str, ...]:
    return tuple(t for t in text.split(",") if t) if text else ()


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treeopt", description="Decision-tree training and benchmarking")
    sub = p.add_subparsers(dest="command", required=True)

    def add_data_flags(sp, with_target=True):
        sp.add_argument("--data", required=True, help="input data file")
        sp.add_argument("--format", choices=("csv", "libsvm"), default="csv")
        if with_target:
            sp.add_argument("--target", help="target column name (CSV)")
            sp.add_argument("--task", choices=("classification", "regression"), default="classification")
        sp.add_argument("--categorical", default="", help="comma-separated categorical column names")

    t = sub.add_parser("train", help="fit a model and write a model file")
    add_data_flags(t)
    t.add_argument("--algo", required=True, choices=("cart", "tao-axis", "tao-oblique"))
    t.add_argument("--lambda", dest="lam", type=float, default=0.01, help="L1 strength (oblique)")
    t.add_argument("--depth", type=int, default=4, help="initial tree depth (oblique)")
    t.add_argument("--iters", type=int, default=30, help="alternating-pass budget")
    t.add_argument("--tol", type=float, default=1e-5, help="axis-mode early-stop threshold")
    t.add_argument("--folds", type=int, default=10, help="folds for pruning selection")
    t.add_argument("--rule", choices=("min", "one-se"), default="one-se", help="pruning rule (cart)")
    t.add_argument("--scale", action="store_true", help="min-max scale features to [0,1]")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="model file to write")
    t.set_defaults(func=_cmd_train)

    pr = sub.add_parser("predict", help="write one prediction per input row")
    pr.add_argument("--model", required=True)
    add_data_flags(pr, with_target=False)
    pr.add_argument("--out", required=True, help="CSV file to write")
    pr.set_defaults(func=_cmd_predict)

    ev = sub.add_parser("eval", help="print the metric and tree size on labeled data")
    ev.add_argument("--model", required=True)
    add_data_flags(ev)
    ev.set_defaults(func=_cmd_eval)

    ins = sub.add_parser("inspect", help="print IF-THEN rules or the raw model")
    ins.add_argument("--model", required=True)
    ins.add_argument("--view", choices=("rules", "json"), default="rules")
    ins.set_defaults(func=_cmd_inspect)

    b = sub.add_parser("bench", help="run an experiment config and write a results table")
    b.add_argument("--config", required=True, help="JSON experiment config")
    b.add_argument("--out", required=True, help="results file to write")
    b.add_argument("--table", choices=("csv", "markdown"), default="csv")
    b.set_defaults(func=_cmd_bench)
    return p


def _load_labeled(args):
    if args.format == "libsvm":
        return load_libsvm(args.data, args.task)
    if args.target is None:
        raise DataError("--target is required for CSV data")
    return load_csv(args.data, args.target, args.task, _split_csv_list(args.categorical))


def _cmd_train(args) -> int:
    data = _load_labeled(args)
    if args.scale:
        data = MinMaxScaler.fit(data).apply(data)
    hyper = {
        "lambda": args.lam,
        "depth": args.depth,
        "iters": args.iters,
        "tol": args.tol,
        "rule": args.rule.replace("-", "_"),
    }
    algo = args.algo.replace("-", "_")
    model = bench.fit_model(algo, data, hyper, args.seed, args.folds)
    Path(args.out).write_bytes(serialize(model))
    print(f"wrote {args.out}: depth {model.depth()}, leaves {model.num_leaves()}")
    return 0


def _cmd_predict(args) -> int:
    model = deserialize(Path(args.model).read_bytes())
    if args.format == "libsvm":
        X = load_libsvm(args.data, model.task.kind).features
    else:
        X, _ = load_feature_csv(args.data, _split_csv_list(args.categorical))
    preds = model.predict_many(X)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if model.task.is_classification or model.task.k == 1:
            writer.writerow(["prediction"])
            for v in np.asarray(preds).reshape(-1):
                writer.writerow([int(v) if model.task.is_classification else repr(float(v))])
        else:
            writer.writerow([f"prediction_{j + 1}" for j in range(model.task.k)])
            for row in preds:
                writer.writerow([repr(float(v)) for v in row])
    print(f"wrote {args.out}: {len(preds)} predictions")
    return 0


def _cmd_eval(args) -> int:
    model = deserialize(Path(args.model).read_bytes())
    data = _load_labeled(args)
    metric = bench.evaluate(model, data)
    name = "accuracy" if data.task.is_classification else "rmse"
    print(f"{name}: {metric:.6f}")
    print(f"depth: {model.depth()}")
    print(f"leaves: {model.num_leaves()}")
    return 0


def _cmd_inspect(args) -> int:
    blob = Path(args.model).read_bytes()
    model = deserialize(blob)
    if args.view == "rules":
        sys.stdout.write(export_rules(model))
    else:
        sys.stdout.write(blob.decode("utf-8") + "\n")
    return 0


def _workers(repeats: int) -> int:
    raw = os.environ.get("DTREE_THREADS")
    if raw is None:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        raise DataError(f"DTREE_THREADS must be an integer, got {raw!r}") from None
    if cap == 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, repeats))


def _cmd_bench(args) -> int:
    config = bench.load_config(args.config)
    row = bench.run_experiment(config, workers=_workers(config.repeats))
    table = bench.emit_table([row], args.table)
    Path(args.out).write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.func(args)
    except (DataError, ModelFormatError, FileNotFoundError, IsADirectoryError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # training and internal failures
        print(f"error: {e}", file=sys.stderr)
        return 3


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
