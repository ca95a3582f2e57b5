"""Experiment protocol: repeated shuffled splits, fold-based grid search,
metric aggregation, and table emission.

A JSON experiment config names a dataset (CSV or LIBSVM file), an algorithm
(``cart``, ``tao_axis``, ``tao_oblique``), fixed hyperparameters, and an
optional grid searched by k-fold cross-validation on each repeat's training
split.  Repeat r reshuffles with ``seed + r``; datasets that ship a separate
test file keep it fixed across repeats.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import cart, tao
from .dataset import (
    CLASSIFICATION,
    REGRESSION,
    DataError,
    Dataset,
    MinMaxScaler,
    SplitSpec,
    kfold,
    load_csv,
    load_libsvm,
    train_test_split,
)
from .tree import Tree, complete_tree

ALGORITHMS = ("cart", "tao_axis", "tao_oblique")


class TrainingError(RuntimeError):
    """A model failed to train; the message identifies the failing step."""


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    source: str
    format: str = "csv"
    target: str | int | None = None
    task: str = CLASSIFICATION
    categorical: tuple[str, ...] = ()
    test_source: str | None = None
    test_fraction: float = 0.2
    scale: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    algorithm: str
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    repeats: int = 10
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise DataError(f"unknown algorithm {self.algorithm!r}")
        if self.repeats < 1:
            raise DataError("repeats must be >= 1")
        if self.folds < 2:
            raise DataError("folds must be >= 2")


@dataclass(frozen=True)
class ResultRow:
    """One benchmark cell, aggregated over repeats."""

    dataset: str
    algorithm: str
    task: str
    train_mean: float
    train_std: float
    test_mean: float
    test_std: float
    depth_mean: float
    leaves_mean: float
    chosen: str
    seconds_per_repeat: float


def accuracy(predictions, labels) -> float:
    """Fraction of exact matches."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError("predictions and labels must be equal-length and non-empty")
    return float(np.mean(predictions == labels))


def rmse(predictions, targets, k: int = 1) -> float:
    """sqrt(sum ||y - yhat||^2 / (N * k))."""
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1, k)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, k)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise ValueError("predictions and targets must agree in shape and be non-empty")
    n = predictions.shape[0]
    return float(np.sqrt(((predictions - targets) ** 2).sum() / (n * k)))


def evaluate(model: Tree, data: Dataset) -> float:
    """Reporting metric: accuracy for classification, RMSE for regression."""
    preds = model.predict_many(data.features)
    if data.task.is_classification:
        return accuracy(preds, data.targets)
    return rmse(preds, data.targets, data.task.k)


def load_dataset(spec: DatasetSpec, source: str | None = None, class_labels=None) -> Dataset:
    source = source or spec.source
    if spec.format == "csv":
        if spec.target is None:
            raise DataError(f"dataset {spec.name!r}: CSV sources need a target column")
        return load_csv(source, spec.target, spec.task, spec.categorical, class_labels)
    if spec.format == "libsvm":
        return load_libsvm(source, spec.task)
    raise DataError(f"dataset {spec.name!r}: unknown format {spec.format!r}")


def fit_model(algorithm: str, train: Dataset, hyper: dict, seed: int, folds: int) -> Tree:
    """Train one model with fully resolved hyperparameters.

    cart        greedy growth, then fold-based cost-complexity pruning
                (``rule``: min or one_se, default one_se).
    tao_axis    alternating optimization from a grown-and-pruned tree
                (``init_rule`` defaults to min, giving a larger start).
    tao_oblique alternating optimization from a complete random tree of
                ``depth`` levels with L1 strength ``lambda``.
    """
    loss = tao.ZERO_ONE if train.task.is_classification else tao.SQUARED
    grow_params = cart.CartParams(
        max_depth=int(hyper.get("max_depth", 30)),
        min_split=int(hyper.get("min_split", 1)),
        complexity=float(hyper.get("complexity", 0.0)),
    )
    if algorithm == "cart":
        full = cart.grow(train, grow_params)
        return cart.prune_select(
            full, train, folds, rule=hyper.get("rule", "one_se"), seed=seed, params=grow_params
        )
    if algorithm == "tao_axis":
        full = cart.grow(train, grow_params)
        init = cart.prune_select(
            full, train, folds, rule=hyper.get("init_rule", "min"), seed=seed, params=grow_params
        )
        params = tao.TaoParams(
            lam=0.0,
            max_iters=int(hyper.get("iters", 30)),
            tol=float(hyper.get("tol", 1e-5)),
            loss=loss,
        )
        fitted, _ = tao.tao_fit(init, train, params, tao.AXIS)
        return fitted
    if algorithm == "tao_oblique":
        init = complete_tree(int(hyper.get("depth", 4)), train.d, train.task, seed)
        params = tao.TaoParams(
            lam=float(hyper.get("lambda", 0.01)),
            max_iters=int(hyper.get("iters", 30)),
            tol=float(hyper.get("tol", 1e-5)),
            loss=loss,
        )
        fitted, _ = tao.tao_fit(init, train, params, tao.OBLIQUE)
        return fitted
    raise DataError(f"unknown algorithm {algorithm!r}")


def _grid_points(grid: dict) -> list[dict]:
    if not grid:
        return [{}]
    names = list(grid)
    return [dict(zip(names, combo)) for combo in product(*(grid[n] for n in names))]


@dataclass(frozen=True)
class GridSearchResult:
    best: dict
    table: tuple  # ((point, mean validation metric), ...) in grid order


def grid_search_cv(train: Dataset, config: ExperimentConfig, seed: int | None = None) -> GridSearchResult:
    """Mean k-fold validation metric for every grid point; best point wins.

    Higher accuracy or lower RMSE wins; ties go to the earlier point in grid
    order.  Folds are shared across points, so the comparison is paired and
    deterministic per seed.
    """
    seed = config.seed if seed is None else seed
    points = _grid_points(config.grid)
    folds = kfold(train.n, config.folds, seed)
    higher_better = train.task.is_classification
    table = []
    for point in points:
        hyper = {**config.params, **point}
        scores = []
        for f in range(config.folds):
            train_rows, val_rows = folds.indices(f)
            try:
                model = fit_model(config.algorithm, train.subset(train_rows), hyper, seed, config.folds)
            except Exception as e:
                raise TrainingError(f"grid point {point!r} failed to train: {e}") from e
            scores.append(evaluate(model, train.subset(val_rows)))
        table.append((point, float(np.mean(scores))))
    best = max(table, key=lambda t: t[1]) if higher_better else min(table, key=lambda t: t[1])
    return GridSearchResult(best[0], tuple(table))


def _render_params(params: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in params.items()) if params else "-"


def _single_repeat(config: ExperimentConfig, data: Dataset, test_data: Dataset | None, r: int):
    seed_r = config.seed + r
    if test_data is not None:
        train, test = data, test_data
    else:
        train, test = train_test_split(data, SplitSpec(config.dataset.test_fraction, seed_r))
    if config.dataset.scale:
        scaler = MinMaxScaler.fit(train)
        train, test = scaler.apply(train), scaler.apply(test)
    start = time.perf_counter()
    chosen = grid_search_cv(train, config, seed=seed_r).best if config.grid else {}
    hyper = {**config.params, **chosen}
    try:
        model = fit_model(config.algorithm, train, hyper, seed_r, config.folds)
    except TrainingError:
        raise
    except Exception as e:
        raise TrainingError(f"repeat {r} failed to train: {e}") from e
    seconds = time.perf_counter() - start
    return (
        evaluate(model, train),
        evaluate(model, test),
        model.depth(),
        model.num_leaves(),
        chosen,
        seconds,
    )


def _load_pair(spec: DatasetSpec):
    data = load_dataset(spec)
    if spec.test_source is None:
        return data, None
    return data, load_dataset(spec, spec.test_source, class_labels=data.class_names)


def _pool_repeat(args):
    config, r = args
    data, test = _load_pair(config.dataset)
    return _single_repeat(config, data, test, r)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ResultRow:
    """Full protocol for one (dataset, algorithm) cell.

    Deterministic given the config: every repeat reshuffles, grid-searches,
    and refits from ``seed + r``.  With ``repeats == 1`` the reported
    standard deviations are 0; otherwise they are sample (n-1) deviations.
    """
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_pool_repeat, [(config, r) for r in range(config.repeats)]))
    else:
        data, test = _load_pair(config.dataset)
        results = [_single_repeat(config, data, test, r) for r in range(config.repeats)]

    train_m = np.array([r[0] for r in results])
    test_m = np.array([r[1] for r in results])
    chosen_strings = [_render_params(r[4]) for r in results]
    top = max(dict.fromkeys(chosen_strings), key=chosen_strings.count)

    def std(v):
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    return ResultRow(
        dataset=config.dataset.name,
        algorithm=config.algorithm,
        task=config.dataset.task,
        train_mean=float(train_m.mean()),
        train_std=std(train_m),
        test_mean=float(test_m.mean()),
        test_std=std(test_m),
        depth_mean=float(np.mean([r[2] for r in results])),
        leaves_mean=float(np.mean([r[3] for r in results])),
        chosen=top,
        seconds_per_repeat=float(np.mean([r[5] for r in results])),
    )


_COLUMNS = (
    "dataset",
    "algorithm",
    "train_mean",
    "train_std",
    "test_mean",
    "test_std",
    "depth",
    "leaves",
    "params",
    "seconds_per_repeat",
)


def emit_table(rows, format: str = "csv") -> str:
    """Render result rows as CSV (raw "." decimals) or a markdown table.

    Markdown shows classification metrics as percentages with the mean±std
    convention.  Rows must share one task kind.
    """
    rows = list(rows)
    kinds = {r.task for r in rows}
    if len(kinds) > 1:
        raise ValueError("cannot mix classification and regression rows in one table")
    cls = kinds == {CLASSIFICATION}
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.dataset,
                    r.algorithm,
                    r.train_mean,
                    r.train_std,
                    r.test_mean,
                    r.test_std,
                    r.depth_mean,
                    r.leaves_mean,
                    r.chosen,
                    round(r.seconds_per_repeat, 4),
                ]
            )
        return buf.getvalue()
    if format == "markdown":
        def metric(m, s):
            if cls:
                return f"{100 * m:.2f}±{100 * s:.2f}"
            return f"{m:.4g}±{s:.2g}"

        lines = [
            "| dataset | algorithm | train | test | depth | leaves | params | s/repeat |",
            "|---|---|---|---|---|---|---|---|",
        ]
        for r in rows:
            lines.append(
                f"| {r.dataset} | {r.algorithm} | {metric(r.train_mean, r.train_std)} "
                f"| {metric(r.test_mean, r.test_std)} | {r.depth_mean:.1f} "
                f"| {r.leaves_mean:.1f} | {r.chosen} | {r.seconds_per_repeat:.2f} |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {format!r}")


def load_config(path) -> ExperimentConfig:
    """Parse a JSON experiment config; paths resolve relative to the file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"{path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}") from e
    try:
        ds = doc["dataset"]
        base = path.parent

        def resolve(p):
            return str((base / p).resolve()) if p else None

        spec = DatasetSpec(
            name=ds.get("name", path.stem),
            source=resolve(ds["source"]),
            format=ds.get("format", "csv"),
            target=ds.get("target"),
            task=ds.get("task", CLASSIFICATION),
            categorical=tuple(ds.get("categorical", ())),
            test_source=resolve(ds.get("test_source")),
            test_fraction=float(ds.get("test_fraction", 0.2)),
            scale=bool(ds.get("scale", False)),
        )
        return ExperimentConfig(
            dataset=spec,
            algorithm=doc["algorithm"],
            params=dict(doc.get("params", {})),
            grid={k: list(v) for k, v in doc.get("grid", {}).items()},
            repeats=int(doc.get("repeats", 10)),
            folds=int(doc.get("folds", 10)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DataError):
            raise
        raise DataError(f"{path}: bad experiment config: {e}") from e
