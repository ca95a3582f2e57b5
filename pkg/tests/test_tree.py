import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import treeopt as t
from treeopt.tree import AxisSplit, Leaf, ModelFormatError, Node, ObliqueSplit

from conftest import FIXTURES, random_classification


def leaf_tree(output, task):
    return t.Tree(task, [Node(Leaf(output))])


def stump(kind, left_out, right_out, task):
    nodes = [Node(kind, left=1, right=2), Node(Leaf(left_out)), Node(Leaf(right_out))]
    return t.Tree(task, nodes)


CLS2 = t.Task.classification(2)
CLS3 = t.Task.classification(3)


class TestPredict:
    def test_single_leaf(self):
        tree = leaf_tree(2, CLS3)
        assert tree.predict([1.0, 2.0]) == 2
        assert tree.predict([-5.0, 0.0]) == 2

    def test_axis_stump_boundary_goes_right(self):
        tree = stump(AxisSplit(0, 0.5), 1, 2, CLS2)
        assert tree.predict([0.4, 9.9]) == 1
        assert tree.predict([0.5, -9.9]) == 2

    def test_oblique_stump_dot_product(self):
        # w=(1,1), b=1.0; x=(0.6,0.6) has w.x = 1.2 >= 1 -> right leaf
        tree = stump(ObliqueSplit(np.array([1.0, 1.0]), 1.0), 1, 2, CLS2)
        assert tree.predict([0.6, 0.6]) == 2
        assert tree.predict([0.4, 0.5]) == 1

    def test_dimension_mismatch(self):
        tree = stump(AxisSplit(1, 0.0), 1, 2, CLS2)
        with pytest.raises(ValueError, match="dimension"):
            tree.predict([1.0])

    def test_regression_output_vector(self):
        tree = leaf_tree(np.array([1.5, -2.0]), t.Task.regression(2))
        out = tree.predict_many(np.zeros((3, 4)))
        assert out.shape == (3, 2)
        assert list(out[0]) == [1.5, -2.0]

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20)
    def test_routing_totality(self, seed):
        rng = np.random.default_rng(seed)
        tree = t.complete_tree(int(rng.integers(0, 4)), 3, CLS3, seed)
        X = rng.normal(scale=100.0, size=(20, 3))
        leaves = tree.route_many(X)
        leaf_set = set(tree.leaf_ids())
        assert all(int(i) in leaf_set for i in leaves)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20)
    def test_axis_matches_one_hot_oblique(self, seed):
        rng = np.random.default_rng(seed)
        j = int(rng.integers(0, 3))
        thr = float(rng.normal())
        axis = stump(AxisSplit(j, thr), 1, 2, CLS2)
        w = np.zeros(3)
        w[j] = 1.0
        oblique = stump(ObliqueSplit(w, thr), 1, 2, CLS2)
        X = rng.normal(size=(30, 3))
        X[0, j] = thr  # include the boundary
        assert np.array_equal(axis.predict_many(X), oblique.predict_many(X))


class TestSize:
    def test_single_leaf(self):
        tree = leaf_tree(1, CLS2)
        assert tree.depth() == 0 and tree.num_leaves() == 1

    def test_complete_depth3(self):
        tree = t.complete_tree(3, 2, CLS2, 0)
        assert tree.depth() == 3 and tree.num_leaves() == 8

    def test_complete_depth8(self):
        tree = t.complete_tree(8, 4, CLS2, 0)
        assert tree.num_nodes() == 511 and tree.num_leaves() == 256

    def test_same_seed_identical(self):
        a = t.complete_tree(4, 3, CLS3, 99)
        b = t.complete_tree(4, 3, CLS3, 99)
        assert t.trees_equal(a, b)
        c = t.complete_tree(4, 3, CLS3, 100)
        assert not t.trees_equal(a, c)


class TestPruneDead:
    def test_zero_hyperplane_promotes_right(self):
        rng = np.random.default_rng(0)
        inner = stump(AxisSplit(0, 0.0), 1, 2, CLS2)
        nodes = [
            Node(ObliqueSplit(np.zeros(2), 0.0), left=1, right=2),
            Node(Leaf(1)),
            Node(AxisSplit(0, 0.0), left=3, right=4),
            Node(Leaf(1)),
            Node(Leaf(2)),
        ]
        tree = t.Tree(CLS2, nodes)
        data = t.Dataset(rng.normal(size=(10, 2)), np.ones(10, dtype=np.int64), CLS2, ("a", "b"))
        pruned = t.prune_dead(tree, data)
        # 0 >= 0 routes everything right, so the right subtree becomes the root
        assert t.trees_equal(pruned, inner)

    def test_no_dead_branches_is_identity(self, iris):
        grown = t.grow(iris)
        pruned = t.prune_dead(grown, iris)
        assert t.trees_equal(grown, pruned)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20)
    def test_preserves_predictions_and_size(self, seed):
        rng = np.random.default_rng(seed)
        tree = t.complete_tree(4, 3, CLS3, seed)
        data = random_classification(20, 3, 3, seed + 1)
        pruned = t.prune_dead(tree, data)
        assert np.array_equal(
            pruned.predict_many(data.features), tree.predict_many(data.features)
        )
        assert pruned.depth() <= tree.depth()
        assert pruned.num_leaves() <= tree.num_leaves()


class TestSerialize:
    def test_round_trip_random_tree(self):
        tree = t.complete_tree(5, 4, CLS3, 7)
        back = t.deserialize(t.serialize(tree))
        assert t.trees_equal(tree, back)

    def test_round_trip_regression(self):
        tree = t.complete_tree(2, 3, t.Task.regression(2), 3)
        back = t.deserialize(t.serialize(tree))
        assert t.trees_equal(tree, back)

    def test_empty_input(self):
        with pytest.raises(ModelFormatError):
            t.deserialize(b"")

    def test_unknown_version(self):
        tree = leaf_tree(1, CLS2)
        doc = t.serialize(tree).replace(b'"version": 1', b'"version": 99')
        with pytest.raises(ModelFormatError, match="version"):
            t.deserialize(doc)

    def test_golden_v1_model(self):
        # pinned when the format was frozen; must load forever under version 1
        blob = (FIXTURES / "model_v1.json").read_bytes()
        tree = t.deserialize(blob)
        X = np.array(
            [[0.0, 0.0, 0.0], [1.0, -1.0, 0.5], [-2.0, 0.3, 0.9], [0.2, 0.8, -1.5]]
        )
        assert list(tree.predict_many(X)) == [2, 3, 1, 2]
        assert t.serialize(tree) == blob


class TestExportRules:
    def test_single_leaf(self):
        assert t.export_rules(leaf_tree(2, CLS3)) == "TRUE → class 2\n"

    def test_axis_stump(self):
        text = t.export_rules(stump(AxisSplit(0, 0.5), 1, 2, CLS2))
        lines = text.splitlines()
        assert lines[0] == "x[0] < 0.5 → class 1"
        assert lines[1] == "x[0] ≥ 0.5 → class 2"

    def test_oblique_elides_zero_weights(self):
        tree = stump(ObliqueSplit(np.array([0.0, 1.5, 0.0]), 0.7), 1, 2, CLS2)
        lines = t.export_rules(tree).splitlines()
        assert lines[0] == "1.5·x[1] < 0.7 → class 1"
        assert lines[1] == "1.5·x[1] ≥ 0.7 → class 2"

    def test_regression_outputs(self):
        tree = leaf_tree(np.array([2.5]), t.Task.regression(1))
        assert t.export_rules(tree) == "TRUE → (2.5)\n"


class TestValidation:
    def test_internal_needs_children(self):
        with pytest.raises(ValueError):
            t.Tree(CLS2, [Node(AxisSplit(0, 0.0), left=-1, right=-1)])

    def test_leaf_must_match_task(self):
        with pytest.raises(ValueError):
            leaf_tree(5, CLS2)  # class out of range
        with pytest.raises(ValueError):
            leaf_tree(np.array([1.0, 2.0]), t.Task.regression(1))

    def test_unreachable_node(self):
        nodes = [Node(Leaf(1)), Node(Leaf(2))]
        with pytest.raises(ValueError, match="reachable"):
            t.Tree(CLS2, nodes)

    def test_cycle(self):
        nodes = [Node(AxisSplit(0, 0.0), left=0, right=1), Node(Leaf(1))]
        with pytest.raises(ValueError):
            t.Tree(CLS2, nodes)
