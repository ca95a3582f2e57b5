import json

import numpy as np
import pytest

import treeopt as t
from treeopt.bench import (
    DatasetSpec,
    ExperimentConfig,
    GridSearchResult,
    ResultRow,
    TrainingError,
    _grid_points,
    emit_table,
    evaluate,
    fit_model,
    grid_search_cv,
    load_config,
    run_experiment,
)
from treeopt.dataset import DataError

from conftest import DATA, blobs


def iris_spec(**kw):
    base = dict(name="iris", source=str(DATA / "iris.csv"), target="target", task="classification")
    base.update(kw)
    return DatasetSpec(**base)


class TestMetrics:
    def test_accuracy_all_correct(self):
        assert t.accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_accuracy_two_thirds(self):
        assert t.accuracy([1, 2, 1], [1, 1, 1]) == pytest.approx(2 / 3)

    def test_accuracy_length_mismatch(self):
        with pytest.raises(ValueError):
            t.accuracy([1], [1, 2])

    def test_rmse_perfect(self):
        assert t.rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_rmse_unit_errors(self):
        # two rows with errors (+1, -1): sqrt(2 / 2) = 1
        assert t.rmse([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_rmse_multi_output(self):
        preds = np.array([[1.0, 0.0], [0.0, 0.0]])
        targets = np.zeros((2, 2))
        assert t.rmse(preds, targets, k=2) == pytest.approx(0.5)

    def test_rmse_shape_mismatch(self):
        with pytest.raises(ValueError):
            t.rmse(np.ones((2, 1)), np.ones((3, 1)))


class TestGridSearch:
    def test_grid_points_order(self):
        pts = _grid_points({"a": [1, 2], "b": ["x"]})
        assert pts == [{"a": 1, "b": "x"}, {"a": 2, "b": "x"}]
        assert _grid_points({}) == [{}]

    def test_singleton_grid_still_scores(self):
        cfg = ExperimentConfig(
            dataset=iris_spec(), algorithm="cart", grid={"rule": ["one_se"]},
            repeats=1, folds=5, seed=0,
        )
        train = t.load_csv(DATA / "iris.csv", "target", "classification")
        result = grid_search_cv(train, cfg)
        assert result.best == {"rule": "one_se"}
        assert len(result.table) == 1
        assert 0.8 <= result.table[0][1] <= 1.0

    def test_huge_lambda_loses(self):
        ds = blobs(n=60, seed=2)
        spec = DatasetSpec(name="blobs", source="unused", target="y", task="classification")
        cfg = ExperimentConfig(
            dataset=spec, algorithm="tao_oblique", params={"depth": 2},
            grid={"lambda": [0.001, 1000.0]}, repeats=1, folds=5, seed=3,
        )
        result = grid_search_cv(ds, cfg, seed=3)
        assert result.best == {"lambda": 0.001}

    def test_cart_rule_grid(self):
        train = t.load_csv(DATA / "iris.csv", "target", "classification")
        cfg = ExperimentConfig(
            dataset=iris_spec(), algorithm="cart", grid={"rule": ["min", "one_se"]},
            repeats=1, folds=5, seed=1,
        )
        result = grid_search_cv(train, cfg)
        assert result.best["rule"] in ("min", "one_se")
        assert len(result.table) == 2

    def test_failing_point_identified(self):
        ds = blobs(n=30, seed=1)
        spec = DatasetSpec(name="blobs", source="unused", target="y", task="classification")
        cfg = ExperimentConfig(
            dataset=spec, algorithm="tao_oblique", grid={"depth": [-3]},
            repeats=1, folds=5, seed=0,
        )
        with pytest.raises(TrainingError, match="depth"):
            grid_search_cv(ds, cfg)


class TestRunExperiment:
    def test_single_repeat_zero_std(self):
        cfg = ExperimentConfig(dataset=iris_spec(), algorithm="cart", repeats=1, folds=5, seed=4)
        row = run_experiment(cfg)
        assert row.train_std == 0.0 and row.test_std == 0.0

    def test_reproducible_bit_identical(self):
        cfg = ExperimentConfig(dataset=iris_spec(), algorithm="tao_axis", repeats=2, folds=5, seed=9)
        a, b = run_experiment(cfg), run_experiment(cfg)
        assert (a.train_mean, a.train_std, a.test_mean, a.test_std) == (
            b.train_mean, b.train_std, b.test_mean, b.test_std
        )
        assert (a.depth_mean, a.leaves_mean, a.chosen) == (b.depth_mean, b.leaves_mean, b.chosen)

    def test_reported_metric_matches_recomputation(self):
        cfg = ExperimentConfig(dataset=iris_spec(), algorithm="cart", repeats=1, folds=5, seed=6)
        row = run_experiment(cfg)
        data = t.load_csv(DATA / "iris.csv", "target", "classification")
        train, test = t.train_test_split(data, t.SplitSpec(0.2, 6))
        model = fit_model("cart", train, {}, 6, 5)
        assert row.test_mean == t.accuracy(model.predict_many(test.features), test.targets)
        assert row.train_mean == t.accuracy(model.predict_many(train.features), train.targets)

    def test_fixed_test_source_respected(self, tmp_path):
        data = t.load_csv(DATA / "iris.csv", "target", "classification")
        train, test = t.train_test_split(data, t.SplitSpec(0.2, 0))
        # write the two parts as separate CSVs and point the config at them
        def dump(ds, path):
            lines = [",".join(ds.feature_names) + ",target"]
            for i in range(ds.n):
                lines.append(",".join(repr(float(v)) for v in ds.features[i]) + f",c{ds.targets[i]}")
            path.write_text("\n".join(lines) + "\n")
        dump(train, tmp_path / "train.csv")
        dump(test, tmp_path / "test.csv")
        spec = DatasetSpec(
            name="iris-pre", source=str(tmp_path / "train.csv"), target="target",
            task="classification", test_source=str(tmp_path / "test.csv"),
        )
        cfg = ExperimentConfig(dataset=spec, algorithm="cart", repeats=2, folds=5, seed=1)
        row = run_experiment(cfg)
        assert 0.7 <= row.test_mean <= 1.0


GOLDEN_ROWS = [
    ResultRow("iris", "tao_axis", "classification", 0.9758, 0.0061, 0.9541, 0.0381, 3.0, 4.4, "-", 0.02),
    ResultRow("balance_scale", "cart", "classification", 0.8622, 0.01, 0.7896, 0.0034, 6.3, 22.9, "rule=one_se", 0.25),
]

GOLDEN_MARKDOWN = """\
| dataset | algorithm | train | test | depth | leaves | params | s/repeat |
|---|---|---|---|---|---|---|---|
| iris | tao_axis | 97.58±0.61 | 95.41±3.81 | 3.0 | 4.4 | - | 0.02 |
| balance_scale | cart | 86.22±1.00 | 78.96±0.34 | 6.3 | 22.9 | rule=one_se | 0.25 |
"""


class TestEmitTable:
    def test_empty_rows_header_only(self):
        out = emit_table([], "csv")
        assert out.count("\n") == 1
        assert out.startswith("dataset,algorithm,train_mean")

    def test_one_row_two_lines(self):
        out = emit_table([GOLDEN_ROWS[0]], "csv")
        assert out.count("\n") == 2

    def test_golden_markdown(self):
        assert emit_table(GOLDEN_ROWS, "markdown") == GOLDEN_MARKDOWN

    def test_mixed_tasks_rejected(self):
        reg = ResultRow("abalone", "cart", "regression", 2.1, 0.1, 2.3, 0.1, 5.0, 12.0, "-", 1.0)
        with pytest.raises(ValueError, match="mix"):
            emit_table([GOLDEN_ROWS[0], reg], "csv")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_table([], "html")

    def test_csv_parses_back(self):
        import csv as csvmod
        import io

        out = emit_table(GOLDEN_ROWS, "csv")
        rows = list(csvmod.reader(io.StringIO(out)))
        assert len(rows) == 3 and rows[1][0] == "iris"
        assert float(rows[1][2]) == 0.9758


class TestConfig:
    def test_load_and_resolve_paths(self, tmp_path):
        doc = {
            "dataset": {
                "name": "iris",
                "source": "iris.csv",
                "target": "target",
                "task": "classification",
            },
            "algorithm": "tao_axis",
            "repeats": 3,
            "seed": 17,
        }
        (tmp_path / "iris.csv").write_text((DATA / "iris.csv").read_text())
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = load_config(path)
        assert cfg.dataset.source == str(tmp_path / "iris.csv")
        assert cfg.repeats == 3 and cfg.folds == 10 and cfg.seed == 17

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(DataError, match="JSON"):
            load_config(path)

    def test_unknown_algorithm(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"dataset": {"source": "x.csv"}, "algorithm": "forest"}))
        with pytest.raises(DataError, match="algorithm"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_config(tmp_path / "absent.json")

    def test_validation(self):
        with pytest.raises(DataError):
            ExperimentConfig(dataset=iris_spec(), algorithm="cart", repeats=0)
        with pytest.raises(DataError):
            ExperimentConfig(dataset=iris_spec(), algorithm="cart", folds=1)
