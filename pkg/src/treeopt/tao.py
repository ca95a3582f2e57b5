"""Tree alternating optimization over a fixed tree structure.

The training objective is ``sum_n L(y_n, T(x_n)) + lam * sum_i ||w_i||_1``
with the penalty over internal hyperplane nodes.  Nodes that are not
ancestors of one another contribute separably, so each pass sweeps the depth
levels from deepest to root, replacing every node's parameters with the
solution of its reduced problem: a weighted binary classification at
internal nodes, a majority vote or mean at leaves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .solver import HyperplaneSolution, WeightedSamples, best_axis_split, l1_logistic
from .tree import (
    AxisSplit,
    Leaf,
    ObliqueSplit,
    Tree,
    prune_dead,
    reaching_partition,
    trees_equal,
)

ZERO_ONE = "zero_one"
SQUARED = "squared_error"

AXIS = "axis"
OBLIQUE = "oblique"

# Inner solver budget for per-node hyperplane refits.  Guarded acceptance only
# needs a descent direction, not full convergence, so this is much looser than
# the solver's stand-alone defaults; warm starts make later passes cheap.
SOLVER_TOL = 1e-5
SOLVER_SWEEPS = 60
SOLVER_STALL_RTOL = 1e-6


@dataclass(frozen=True)
class TaoParams:
    """lam weighs the L1 penalty (meaningful for oblique trees, 0 for axis);
    tol is the axis-mode early-stopping threshold on relative loss improvement."""

    lam: float = 0.0
    max_iters: int = 30
    tol: float = 1e-5
    loss: str = ZERO_ONE

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0.0:
            raise ValueError("tol must be >= 0")
        if self.loss not in (ZERO_ONE, SQUARED):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass(frozen=True)
class ReducedProblem:
    """Weighted binary classification extracted at one internal node."""

    node: int
    samples: WeightedSamples


@dataclass(frozen=True)
class TraceEntry:
    objective: float
    train_loss: float
    penalty: float
    leaves: int


def _check_loss(task, loss: str):
    if task.is_classification and loss != ZERO_ONE:
        raise ValueError("classification trees train with the zero-one loss")
    if not task.is_classification and loss != SQUARED:
        raise ValueError("regression trees train with the squared-error loss")


def objective_parts(tree: Tree, data: Dataset, params: TaoParams) -> tuple[float, float]:
    """(training loss, L1 penalty over oblique node weights)."""
    _check_loss(tree.task, params.loss)
    preds = tree.predict_many(data.features)
    if params.loss == ZERO_ONE:
        loss = float(np.sum(preds != data.targets))
    else:
        loss = float(((preds - data.targets) ** 2).sum())
    penalty = 0.0
    for i in tree.internal_ids():
        kind = tree.nodes[i].kind
        if isinstance(kind, ObliqueSplit):
            penalty += float(np.abs(kind.weights).sum())
    return loss, penalty


def objective(tree: Tree, data: Dataset, params: TaoParams) -> float:
    loss, penalty = objective_parts(tree, data, params)
    return loss + params.lam * penalty


def reaching_sets(tree: Tree, data: Dataset) -> dict[int, np.ndarray]:
    """Rows whose root-to-leaf path passes through each node."""
    return reaching_partition(tree, data.features)


def reaching_set(tree: Tree, node: int, data: Dataset) -> np.ndarray:
    return reaching_sets(tree, data)[node]


def _row_losses(tree: Tree, start: int, X: np.ndarray, y: np.ndarray, loss: str) -> np.ndarray:
    """Per-row loss when the rows are routed into the subtree rooted at ``start``."""
    preds = tree.predict_many(X, start=start)
    if loss == ZERO_ONE:
        return (preds != y).astype(np.float64)
    return ((preds - y) ** 2).sum(axis=1)


def _reduced_from_rows(tree: Tree, node: int, rows: np.ndarray, data: Dataset, loss: str) -> ReducedProblem:
    X = data.features[rows]
    y = data.targets[rows]
    left = _row_losses(tree, tree.nodes[node].left, X, y, loss)
    right = _row_losses(tree, tree.nodes[node].right, X, y, loss)
    keep = left != right  # equal-loss rows are don't-cares and are omitted
    pseudo = np.where(right < left, 1, -1)[keep]
    weight = np.abs(left - right)[keep]
    return ReducedProblem(node, WeightedSamples(X[keep], pseudo, weight))


def build_internal_reduced(tree: Tree, node: int, data: Dataset, loss: str) -> ReducedProblem:
    """Pseudo-labeled, weighted samples for one internal node.

    Every reaching row is routed through both child subtrees with all other
    parameters fixed; the pseudo-label points at the cheaper child (+1 for
    right) and the weight is the loss difference.
    """
    if tree.is_leaf(node):
        raise ValueError(f"node {node} is a leaf")
    _check_loss(tree.task, loss)
    rows = reaching_set(tree, node, data)
    return _reduced_from_rows(tree, node, rows, data, loss)


def optimize_leaf(tree: Tree, node: int, data: Dataset, loss: str) -> Leaf:
    """Best constant for a leaf: majority label or componentwise mean.

    Ties go to the smallest class index; an empty reaching set leaves the
    leaf unchanged (a later dead-branch prune removes it).
    """
    if not tree.is_leaf(node):
        raise ValueError(f"node {node} is not a leaf")
    _check_loss(tree.task, loss)
    rows = reaching_set(tree, node, data)
    return _optimize_leaf_rows(tree, node, rows, data)


def _optimize_leaf_rows(tree: Tree, node: int, rows: np.ndarray, data: Dataset) -> Leaf:
    current = tree.nodes[node].kind
    if rows.size == 0:
        out = current.output
        return Leaf(out.copy() if isinstance(out, np.ndarray) else out)
    if tree.task.is_classification:
        counts = np.bincount(data.targets[rows] - 1, minlength=tree.task.k)
        return Leaf(int(np.argmax(counts)) + 1)
    return Leaf(data.targets[rows].mean(axis=0))


def _weighted_error(samples: WeightedSamples, go_right: np.ndarray) -> float:
    wants_right = samples.label == 1
    return float(samples.weight[go_right != wants_right].sum())


def _node_update(tree: Tree, node: int, rows: np.ndarray, data: Dataset, params: TaoParams, mode: str):
    """New parameters for one node given the rest of the tree, or None to keep.

    Internal-node updates are guarded: the replacement is kept only when its
    reduced objective (weighted 0/1 error, plus the L1 term for hyperplanes)
    does not exceed the current parameters'.
    """
    if tree.is_leaf(node):
        return _optimize_leaf_rows(tree, node, rows, data)
    if rows.size == 0:
        return None
    reduced = _reduced_from_rows(tree, node, rows, data, params.loss)
    samples = reduced.samples
    if len(samples) == 0:
        return None
    kind = tree.nodes[node].kind
    if mode == AXIS:
        feature, threshold, error = best_axis_split(samples)
        old = _weighted_error(samples, samples.x[:, kind.feature] >= kind.threshold)
        if error <= old:
            return AxisSplit(feature, threshold)
        return None
    # tree routing uses w.x >= bias, the solver scores w.x + bias >= 0
    warm = HyperplaneSolution(kind.weights, -kind.bias, 0.0, int(np.count_nonzero(kind.weights)))
    sol = l1_logistic(
        samples,
        params.lam,
        warm_start=warm,
        tol=SOLVER_TOL,
        max_sweeps=SOLVER_SWEEPS,
        stall_rtol=SOLVER_STALL_RTOL,
    )
    new_cost = _weighted_error(samples, samples.x @ sol.weights + sol.bias >= 0.0)
    new_cost += params.lam * float(np.abs(sol.weights).sum())
    old_cost = _weighted_error(samples, samples.x @ kind.weights >= kind.bias)
    old_cost += params.lam * float(np.abs(kind.weights).sum())
    if new_cost <= old_cost:
        return ObliqueSplit(sol.weights.copy(), -sol.bias)
    return None


def _check_mode(tree: Tree, mode: str):
    if mode not in (AXIS, OBLIQUE):
        raise ValueError(f"unknown mode {mode!r}")
    wanted = AxisSplit if mode == AXIS else ObliqueSplit
    for i in tree.internal_ids():
        if not isinstance(tree.nodes[i].kind, wanted):
            raise ValueError(
                f"mode {mode!r} cannot update a {type(tree.nodes[i].kind).__name__} node"
            )


def tao_iteration(tree: Tree, data: Dataset, params: TaoParams, mode: str) -> tuple[Tree, float]:
    """One alternating pass: update every node, deepest level first.

    Nodes at one depth have disjoint reaching sets, so within a level the
    update order does not matter; reaching sets depend only on ancestors,
    which a bottom-up sweep has not yet touched, so they are computed once.
    """
    _check_mode(tree, mode)
    _check_loss(tree.task, params.loss)
    work = tree.copy()
    reach = reaching_sets(work, data)
    depths = work.node_depths()
    by_level: dict[int, list[int]] = {}
    for i, level in depths.items():
        by_level.setdefault(level, []).append(i)
    for level in sorted(by_level, reverse=True):
        for i in sorted(by_level[level]):
            new_kind = _node_update(work, i, reach[i], data, params, mode)
            if new_kind is not None:
                work.nodes[i].kind = new_kind
    return work, objective(work, data, params)


def tao_fit(init: Tree, data: Dataset, params: TaoParams, mode: str) -> tuple[Tree, list[TraceEntry]]:
    """Run alternating passes from ``init`` and prune dead branches at the end.

    Axis mode stops early once the relative training-loss improvement drops
    below ``params.tol``; oblique mode runs the full iteration budget.  When
    a pass leaves the tree unchanged it is a fixed point and the remaining
    iterations are recorded without recomputation.  The objective trace is
    checked to be non-increasing; a violation would be a bug in the guarded
    node updates.
    """
    _check_mode(init, mode)
    _check_loss(init.task, params.loss)
    cur = init
    prev_loss, prev_obj = None, None
    trace: list[TraceEntry] = []
    init_loss, init_pen = objective_parts(init, data, params)
    prev_loss = init_loss
    prev_obj = init_loss + params.lam * init_pen
    for _ in range(params.max_iters):
        new_tree, obj = tao_iteration(cur, data, params, mode)
        loss, penalty = objective_parts(new_tree, data, params)
        entry = TraceEntry(obj, loss, penalty, new_tree.num_leaves())
        trace.append(entry)
        if obj > prev_obj + 1e-9 * (1.0 + abs(prev_obj)):
            raise AssertionError(
                f"objective increased from {prev_obj} to {obj}; guarded updates are broken"
            )
        at_fixed_point = trees_equal(cur, new_tree)
        cur = new_tree
        if mode == AXIS and (prev_loss - loss) < params.tol * max(prev_loss, 1e-12):
            break
        if at_fixed_point:
            trace.extend([entry] * (params.max_iters - len(trace)))
            break
        prev_loss, prev_obj = loss, obj
    return prune_dead(cur, data), trace
