"""Tabular dataset loading, one-hot encoding, splitting, and fold assignment.

Two on-disk formats are supported, both documented bit-exactly in the README:
CSV (comma separated, mandatory header row, "." decimal point, UTF-8) and
LIBSVM (``label idx:val ...`` with 1-based strictly increasing indices).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"


class DataError(ValueError):
    """Malformed data file or invalid dataset argument."""


@dataclass(frozen=True)
class Task:
    """Prediction task: classification over classes {1..k}, or k-dimensional regression."""

    kind: str
    k: int

    def __post_init__(self):
        if self.kind not in (CLASSIFICATION, REGRESSION):
            raise DataError(f"unknown task kind {self.kind!r}")
        if self.k < 1:
            raise DataError("output dimension k must be >= 1")

    @property
    def is_classification(self) -> bool:
        return self.kind == CLASSIFICATION

    @classmethod
    def classification(cls, k: int) -> "Task":
        return cls(CLASSIFICATION, k)

    @classmethod
    def regression(cls, k: int = 1) -> "Task":
        return cls(REGRESSION, k)


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with targets.

    ``features`` is an (N, D) float64 matrix.  For classification ``targets``
    is an (N,) int64 vector with values in {1..K}; for regression it is an
    (N, K) float64 matrix.  Arrays are marked read-only so a Dataset can be
    shared across threads.
    """

    features: np.ndarray
    targets: np.ndarray
    task: Task
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...] | None = None  # original label per class index

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("features must be a non-empty 2-d matrix")
        if not np.isfinite(X).all():
            raise DataError("features contain non-finite values")
        if self.task.is_classification:
            y = np.ascontiguousarray(self.targets, dtype=np.int64)
            if y.ndim != 1 or y.shape[0] != X.shape[0]:
                raise DataError("targets length must match feature rows")
            if y.min(initial=1) < 1 or y.max(initial=1) > self.task.k:
                raise DataError(f"class labels must lie in 1..{self.task.k}")
        else:
            y = np.ascontiguousarray(self.targets, dtype=np.float64)
            if y.ndim == 1:
                y = y.reshape(-1, 1)
            if y.shape != (X.shape[0], self.task.k):
                raise DataError("regression targets must have shape (N, k)")
            if not np.isfinite(y).all():
                raise DataError("targets contain non-finite values")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length must match feature columns")
        if self.class_names is not None:
            if not self.task.is_classification or len(self.class_names) != self.task.k:
                raise DataError("class_names must list one label per class")
            object.__setattr__(self, "class_names", tuple(self.class_names))
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            self.features[rows], self.targets[rows], self.task, self.feature_names, self.class_names
        )


@dataclass(frozen=True)
class SplitSpec:
    """Shuffled train/test split: ``test_fraction`` of rows held out, seeded."""

    test_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError("test_fraction must lie strictly between 0 and 1")
        if self.seed < 0:
            raise DataError("seed must be non-negative")


@dataclass(frozen=True)
class FoldAssignment:
    """Assignment of n rows to folds 0..k-1 with sizes differing by at most 1."""

    k: int
    fold_of: np.ndarray

    def indices(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train_rows, validation_rows) for one fold."""
        val = np.flatnonzero(self.fold_of == fold)
        train = np.flatnonzero(self.fold_of != fold)
        return train, val


def _read_rows(path) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except OSError as e:
        raise DataError(f"{path}: {e.strerror or e}") from e


def _parse_cell(cell: str, path, line: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataError(
            f"{path}: line {line}, column {column!r}: cannot parse {cell!r} as a number"
        ) from None


def _encode_columns(header, body, categorical, path, skip=()):
    """Parse feature columns, expanding categorical ones to one-hot indicators.

    Indicator columns replace the original column in place, named
    ``column=value`` with values ordered by first appearance.
    """
    columns: list[np.ndarray] = []
    names: list[str] = []
    for ci, name in enumerate(header):
        if ci in skip:
            continue
        raw = [row[ci] for row in body]
        if name in categorical:
            levels: dict[str, int] = {}
            for v in raw:
                levels.setdefault(v, len(levels))
            onehot = np.zeros((len(raw), len(levels)))
            for ri, v in enumerate(raw):
                onehot[ri, levels[v]] = 1.0
            for v in levels:
                names.append(f"{name}={v}")
            columns.append(onehot)
        else:
            col = np.array(
                [_parse_cell(v, path, ri + 2, name) for ri, v in enumerate(raw)]
            ).reshape(-1, 1)
            names.append(name)
            columns.append(col)
    if not columns:
        raise DataError(f"{path}: no feature columns")
    return np.hstack(columns), tuple(names)


def load_csv(path, target_column, task_kind: str, categorical_columns=(), class_labels=None) -> Dataset:
    """Load a CSV file with a header row into a Dataset.

    ``target_column`` is a column name or 0-based index.  Categorical feature
    columns (by name) are one-hot encoded.  Classification labels are mapped
    to {1..K} in order of first appearance; pass ``class_labels`` (for
    example from a companion training file) to pin the mapping, with unseen
    labels appended.  Missing or unparseable numeric cells are rejected with
    the offending line and column reported.
    """
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    for ri, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: line {ri + 2} has {len(row)} fields, expected {len(header)}")

    if isinstance(target_column, int):
        if not 0 <= target_column < len(header):
            raise DataError(f"{path}: target column index {target_column} out of range")
        ti = target_column
    else:
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not found")
        ti = header.index(target_column)
    categorical = set(categorical_columns)
    unknown = categorical - set(header)
    if unknown:
        raise DataError(f"{path}: categorical columns not in header: {sorted(unknown)}")

    X, names = _encode_columns(header, body, categorical, path, skip={ti})
    raw_target = [row[ti] for row in body]
    if task_kind == CLASSIFICATION:
        levels: dict[str, int] = {}
        for v in class_labels or ():
            levels.setdefault(v, len(levels) + 1)
        for v in raw_target:
            levels.setdefault(v, len(levels) + 1)
        y = np.array([levels[v] for v in raw_target], dtype=np.int64)
        task = Task.classification(len(levels))
        return Dataset(X, y, task, names, tuple(levels))
    if task_kind == REGRESSION:
        y = np.array(
            [_parse_cell(v, path, ri + 2, header[ti]) for ri, v in enumerate(raw_target)]
        ).reshape(-1, 1)
        return Dataset(X, y, Task.regression(1), names)
    raise DataError(f"unknown task kind {task_kind!r}")


def load_feature_csv(path, categorical_columns=()) -> tuple[np.ndarray, tuple[str, ...]]:
    """Load a target-less CSV of features only (used by the predict command)."""
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    for ri, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: line {ri + 2} has {len(row)} fields, expected {len(header)}")
    return _encode_columns(header, body, set(categorical_columns), path)


def load_libsvm(path, task_kind: str) -> Dataset:
    """Load a LIBSVM-format file: ``label idx:val ...``, indices 1-based.

    The feature dimension is the maximum index observed anywhere in the file;
    absent indices are zero.  Indices must increase strictly within a line.
    Classification labels that already form a set of integers >= 1 are kept
    as-is (K is the maximum label); any other label set is mapped to {1..K}
    by first appearance.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise DataError(f"{path}: {e.strerror or e}") from e

    labels: list[float] = []
    entries: list[list[tuple[int, float]]] = []
    max_idx = 0
    for li, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise DataError(f"{path}: line {li}: non-numeric label {tokens[0]!r}") from None
        pairs = []
        prev = 0
        for tok in tokens[1:]:
            idx_s, _, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DataError(f"{path}: line {li}: bad feature entry {tok!r}") from None
            if idx <= prev:
                raise DataError(
                    f"{path}: line {li}: indices must be 1-based and strictly increasing"
                )
            prev = idx
            pairs.append((idx, val))
        max_idx = max(max_idx, prev)
        entries.append(pairs)
    if not entries:
        raise DataError(f"{path}: empty file")
    if max_idx == 0:
        raise DataError(f"{path}: no feature indices present")

    X = np.zeros((len(entries), max_idx))
    for ri, pairs in enumerate(entries):
        for idx, val in pairs:
            X[ri, idx - 1] = val
    names = tuple(f"f{j}" for j in range(1, max_idx + 1))

    if task_kind == CLASSIFICATION:
        arr = np.array(labels)
        if np.all(arr == np.round(arr)) and arr.min() >= 1:
            y = arr.astype(np.int64)
            task = Task.classification(int(y.max()))
        else:
            seen: dict[float, int] = {}
            for v in labels:
                seen.setdefault(v, len(seen) + 1)
            y = np.array([seen[v] for v in labels], dtype=np.int64)
            task = Task.classification(len(seen))
        return Dataset(X, y, task, names)
    if task_kind == REGRESSION:
        return Dataset(X, np.array(labels).reshape(-1, 1), Task.regression(1), names)
    raise DataError(f"unknown task kind {task_kind!r}")


def save_libsvm(data: Dataset, path) -> None:
    """Write a Dataset in LIBSVM format, eliding exact zeros.

    Values are written with ``repr`` so loading the file back reproduces the
    matrix bit-exactly.  Regression requires a single output dimension.
    """
    if not data.task.is_classification and data.task.k != 1:
        raise DataError("LIBSVM files carry a single target value per row")
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(data.n):
            if data.task.is_classification:
                label = str(int(data.targets[i]))
            else:
                label = repr(float(data.targets[i, 0]))
            parts = [label]
            row = data.features[i]
            for j in np.flatnonzero(row != 0.0):
                parts.append(f"{j + 1}:{repr(float(row[j]))}")
            fh.write(" ".join(parts) + "\n")


def train_test_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Shuffle rows with a PCG64 generator seeded by ``spec.seed`` and hold out
    ``round(N * test_fraction)`` rows as the test set.

    Deterministic per seed: the test set is the first block of the shuffled
    order, the training set keeps the remaining shuffled order.
    """
    if data.n < 2:
        raise DataError("need at least 2 rows to split")
    size = int(np.floor(data.n * spec.test_fraction + 0.5))
    if size == 0 or size == data.n:
        raise DataError(
            f"test_fraction {spec.test_fraction} leaves an empty train or test set for N={data.n}"
        )
    perm = np.random.default_rng(spec.seed).permutation(data.n)
    return data.subset(perm[size:]), data.subset(perm[:size])


def kfold(n: int, k: int, seed: int) -> FoldAssignment:
    """Assign n rows to k folds of near-equal size, shuffled by ``seed``."""
    if k < 2:
        raise DataError("k must be at least 2")
    if k > n:
        raise DataError(f"k={k} exceeds the number of rows n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    start = 0
    for f, size in enumerate(sizes):
        fold_of[perm[start : start + size]] = f
        start += size
    return FoldAssignment(k, fold_of)


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature affine map of the fitted data onto [0, 1].

    Constant columns map to 0.  Off by default everywhere; hyperplane-split
    training is sensitive to feature scale, so the flag exists for it.
    """

    lo: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, data: Dataset) -> "MinMaxScaler":
        lo = data.features.min(axis=0)
        span = data.features.max(axis=0) - lo
        span = np.where(span == 0.0, 1.0, span)
        return cls(lo, span)

    def apply(self, data: Dataset) -> Dataset:
        X = (data.features - self.lo) / self.span
        return Dataset(X, data.targets, data.task, data.feature_names)
