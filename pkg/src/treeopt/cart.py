"""Greedy recursive-partitioning induction with cost-complexity pruning.

Splitting minimizes the children's count-weighted Gini impurity
(classification) or squared error around the child means (regression) over
every feature and every midpoint between consecutive distinct sorted values.
Pruning is weakest-link cost-complexity pruning; fold-based selection
supports both the minimum-CV-loss rule and the 1-SE rule.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .tree import AxisSplit, Leaf, Node, Tree, reaching_partition


@dataclass(frozen=True)
class CartParams:
    """Growing controls.

    ``complexity`` is the minimum impurity-sum decrease, as a fraction of the
    root impurity sum, for a split to be kept; 0 grows until nodes are pure
    or featureless (zero-gain splits are allowed, which is what lets grids
    like XOR be carved fully).
    """

    max_depth: int = 30
    min_split: int = 1
    complexity: float = 0.0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_split < 1:
            raise ValueError("min_split must be >= 1")
        if self.complexity < 0.0:
            raise ValueError("complexity must be >= 0")


def gini(class_counts) -> float:
    """Impurity 1 - sum_k p_k^2 of a count vector."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0 or (counts < 0).any():
        raise ValueError("class counts must be a non-negative vector")
    total = counts.sum()
    if total == 0:
        raise ValueError("class counts must not be all zero")
    p = counts / total
    return float(1.0 - p @ p)


def _leaf_stats_classification(labels0: np.ndarray, k: int):
    counts = np.bincount(labels0, minlength=k)
    impurity_sum = labels0.size - float(counts @ counts) / labels0.size
    output = int(np.argmax(counts)) + 1  # ties -> smallest class index
    collapse_loss = float(labels0.size - counts.max())
    return impurity_sum, output, collapse_loss


def _leaf_stats_regression(y: np.ndarray):
    mean = y.mean(axis=0)
    sse = float(((y - mean) ** 2).sum())
    return sse, mean, sse


def _prefix_scores_classification(labels0: np.ndarray, k: int) -> np.ndarray:
    """Children impurity sums for every prefix cut 0..n-2, Gini scale."""
    n = labels0.size
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels0] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    total = left[-1] + onehot[-1] if n > 1 else onehot.sum(axis=0)
    right = total - left
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    left_sum = nl - (left * left).sum(axis=1) / nl
    right_sum = nr - (right * right).sum(axis=1) / nr
    return left_sum + right_sum


def _prefix_scores_regression(y: np.ndarray) -> np.ndarray:
    n = y.shape[0]
    cs = np.cumsum(y, axis=0)
    cq = np.cumsum(y * y, axis=0)
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    left_sse = (cq[:-1] - cs[:-1] ** 2 / nl).sum(axis=1)
    right_sse = ((cq[-1] - cq[:-1]) - (cs[-1] - cs[:-1]) ** 2 / nr).sum(axis=1)
    return np.maximum(left_sse, 0.0) + np.maximum(right_sse, 0.0)


def grow(data: Dataset, params: CartParams = CartParams()) -> Tree:
    """Grow an axis-aligned tree by greedy recursive partitioning.

    Candidate thresholds are midpoints of consecutive distinct sorted values;
    ties break toward the lowest feature index, then the lowest threshold.
    Recursion stops at ``max_depth``, below ``min_split`` rows, at pure
    nodes, and at nodes whose rows are identical in every feature.
    """
    X, task = data.features, data.task
    cls = task.is_classification
    labels0 = data.targets - 1 if cls else None
    Y = None if cls else data.targets

    # columns of `sorted_rows` hold the node's rows ordered by each feature;
    # partitioning preserves the order so no re-sorting happens below the root
    sorted_rows = np.argsort(X, axis=0, kind="stable")
    go_right = np.zeros(data.n, dtype=bool)

    if cls:
        root_sum, _, _ = _leaf_stats_classification(labels0, task.k)
    else:
        root_sum, _, _ = _leaf_stats_regression(Y)
    min_gain = params.complexity * root_sum

    nodes: list[Node] = []

    def best_split(S: np.ndarray):
        best = None  # (child_sum, feature, threshold)
        for j in range(S.shape[1]):
            idx = S[:, j]
            xs = X[idx, j]
            cut = np.flatnonzero(xs[:-1] != xs[1:])
            if cut.size == 0:
                continue
            if cls:
                scores = _prefix_scores_classification(labels0[idx], task.k)[cut]
            else:
                scores = _prefix_scores_regression(Y[idx])[cut]
            i = int(np.argmin(scores))  # first minimum -> lowest threshold
            if best is None or scores[i] < best[0]:
                pos = cut[i]
                best = (float(scores[i]), j, float((xs[pos] + xs[pos + 1]) / 2.0))
        return best

    def build(S: np.ndarray, depth: int) -> int:
        rows = S[:, 0]
        n = rows.size
        if cls:
            node_sum, output, _ = _leaf_stats_classification(labels0[rows], task.k)
        else:
            node_sum, output, _ = _leaf_stats_regression(Y[rows])
        i = len(nodes)
        split = None
        if depth < params.max_depth and n >= params.min_split and node_sum > 0.0:
            split = best_split(S)
            if split is not None and params.complexity > 0.0 and node_sum - split[0] < min_gain:
                split = None
        if split is None:
            nodes.append(Node(Leaf(output)))
            return i
        _, feature, threshold = split
        nodes.append(Node(AxisSplit(feature, threshold)))
        go_right[rows] = X[rows, feature] >= threshold
        n_right = int(go_right[rows].sum())
        S_left = np.empty((n - n_right, S.shape[1]), dtype=S.dtype)
        S_right = np.empty((n_right, S.shape[1]), dtype=S.dtype)
        for j in range(S.shape[1]):
            mask = go_right[S[:, j]]
            S_right[:, j] = S[mask, j]
            S_left[:, j] = S[~mask, j]
        nodes[i].left = build(S_left, depth + 1)
        nodes[i].right = build(S_right, depth + 1)
        return i

    build(sorted_rows, 0)
    return Tree(task, nodes, root=0)


@dataclass
class PruningPath:
    """Nested weakest-link pruning sequence.

    ``alphas`` strictly increases and starts at 0; ``collapses[k]`` lists the
    internal nodes of the base tree turned into leaves at ``alphas[k]`` (the
    first list is empty unless zero-gain links exist, which collapse at 0).
    The last entry's tree is the root-only tree.  Trees are materialized on
    demand: leaf counts only shrink along the path.
    """

    base: Tree
    data: Dataset
    alphas: list[float]
    collapses: list[list[int]]
    outputs: dict[int, object]
    leaf_losses: dict[int, float] = field(repr=False, default_factory=dict)

    def __len__(self) -> int:
        return len(self.alphas)

    def tree(self, k: int) -> Tree:
        """Materialize the tree pruned at entry ``k``."""
        collapsed = set()
        for part in self.collapses[: k + 1]:
            collapsed.update(part)
        nodes: list[Node] = []

        def rebuild(i: int) -> int:
            j = len(nodes)
            src = self.base.nodes[i]
            if i in collapsed:
                out = self.outputs[i]
                nodes.append(Node(Leaf(out.copy() if isinstance(out, np.ndarray) else out)))
                return j
            kind = src.kind
            if isinstance(kind, Leaf):
                out = kind.output
                nodes.append(Node(Leaf(out.copy() if isinstance(out, np.ndarray) else out)))
                return j
            nodes.append(Node(AxisSplit(kind.feature, kind.threshold)))
            nodes[j].left = rebuild(src.left)
            nodes[j].right = rebuild(src.right)
            return j

        rebuild(self.base.root)
        return Tree(self.base.task, nodes, root=0)

    def tree_at(self, alpha: float) -> Tree:
        return self.tree(self.entry_at(alpha))

    def entry_at(self, alpha: float) -> int:
        k = 0
        for i, a in enumerate(self.alphas):
            if a <= alpha:
                k = i
        return k

    def events(self) -> list[tuple[float, int]]:
        """Collapse events as (alpha, node) in chronological (= alpha) order."""
        return [(a, node) for a, part in zip(self.alphas, self.collapses) for node in part]


def _node_losses(tree: Tree, data: Dataset):
    """Per-node collapse statistics on the pruning loss scale.

    Loss is the misclassification count (classification) or the sum of
    squared errors (regression).  Returns reach sets, the best-constant
    output and its loss per node, and each current leaf's actual loss.
    """
    reach = reaching_partition(tree, data.features)
    cls = tree.task.is_classification
    outputs, collapse_loss, leaf_loss = {}, {}, {}
    for i, rows in reach.items():
        y = data.targets[rows]
        if rows.size == 0:
            node = tree.nodes[i]
            outputs[i] = node.kind.output if isinstance(node.kind, Leaf) else (
                1 if cls else np.zeros(tree.task.k)
            )
            collapse_loss[i] = 0.0
        elif cls:
            counts = np.bincount(y - 1, minlength=tree.task.k)
            outputs[i] = int(np.argmax(counts)) + 1
            collapse_loss[i] = float(rows.size - counts.max())
        else:
            mean = y.mean(axis=0)
            outputs[i] = mean
            collapse_loss[i] = float(((y - mean) ** 2).sum())
        if isinstance(tree.nodes[i].kind, Leaf):
            out = tree.nodes[i].kind.output
            if rows.size == 0:
                leaf_loss[i] = 0.0
            elif cls:
                leaf_loss[i] = float(np.sum(y != out))
            else:
                leaf_loss[i] = float(((y - out) ** 2).sum())
    return reach, outputs, collapse_loss, leaf_loss


def pruning_path(tree: Tree, data: Dataset) -> PruningPath:
    """Weakest-link cost-complexity pruning sequence for ``tree``.

    Repeatedly collapses the internal node with the smallest per-leaf loss
    increase ``g = (collapse_loss - subtree_loss) / (leaves - 1)``; every
    node with the same ``g`` collapses at the same alpha.  Each entry's tree
    minimizes ``loss + alpha * leaves`` over all pruned subtrees throughout
    its alpha interval (so zero-gain links are already collapsed at alpha 0).
    """
    _, outputs, collapse_loss, leaf_loss = _node_losses(tree, data)

    parent = {tree.root: -1}
    post = []
    stack = [tree.root]
    while stack:
        i = stack.pop()
        post.append(i)
        node = tree.nodes[i]
        if not isinstance(node.kind, Leaf):
            parent[node.left] = i
            parent[node.right] = i
            stack.extend((node.left, node.right))
    post.reverse()  # children before parents

    r_sub, leaves_under = {}, {}
    for i in post:
        node = tree.nodes[i]
        if isinstance(node.kind, Leaf):
            r_sub[i] = leaf_loss[i]
            leaves_under[i] = 1
        else:
            r_sub[i] = r_sub[node.left] + r_sub[node.right]
            leaves_under[i] = leaves_under[node.left] + leaves_under[node.right]

    def link_gain(i: int) -> float:
        return max(0.0, (collapse_loss[i] - r_sub[i]) / (leaves_under[i] - 1))

    stamp: dict[int, int] = {}
    heap: list[tuple[float, int, int]] = []

    def push(i: int):
        stamp[i] = stamp.get(i, 0) + 1
        heapq.heappush(heap, (link_gain(i), i, stamp[i]))

    collapsed: set[int] = set()
    for i in post:
        if not isinstance(tree.nodes[i].kind, Leaf):
            push(i)

    def buried(i: int) -> bool:
        p = parent[i]
        while p != -1:
            if p in collapsed:
                return True
            p = parent[p]
        return False

    alphas: list[float] = [0.0]
    collapses: list[list[int]] = [[]]
    while heap:
        g, i, s = heapq.heappop(heap)
        if stamp.get(i) != s or i in collapsed or buried(i):
            continue
        alpha = max(g, alphas[-1])
        if alpha > alphas[-1]:
            alphas.append(alpha)
            collapses.append([])
        collapses[-1].append(i)
        collapsed.add(i)
        delta_r = collapse_loss[i] - r_sub[i]
        delta_l = 1 - leaves_under[i]
        p = parent[i]
        while p != -1:
            r_sub[p] += delta_r
            leaves_under[p] += delta_l
            if not buried(p):
                push(p)
            p = parent[p]

    return PruningPath(tree, data, alphas, collapses, outputs, leaf_loss)


def _candidate_alphas(alphas: list[float]) -> np.ndarray:
    """One representative alpha inside each path interval (geometric means)."""
    betas = []
    for i, a in enumerate(alphas):
        if i + 1 < len(alphas):
            betas.append(float(np.sqrt(a * alphas[i + 1])))
        else:
            betas.append(a)
    return np.array(betas)


def _sweep_losses(path: PruningPath, val: Dataset, betas: np.ndarray) -> np.ndarray:
    """Mean validation loss of ``path`` pruned at each beta, one event sweep.

    Applies the path's collapse events in alpha order, overwriting the
    predictions of validation rows under each collapsed node, and records
    the running loss at every candidate.
    """
    cls = path.base.task.is_classification
    reach = reaching_partition(path.base, val.features)
    if cls:
        preds = path.base.predict_many(val.features)
        row_loss = (preds != val.targets).astype(np.float64)
    else:
        preds = path.base.predict_many(val.features)
        row_loss = ((preds - val.targets) ** 2).sum(axis=1)
    total = float(row_loss.sum())
    events = path.events()
    out = np.empty(betas.size)
    e = 0
    for ci, beta in enumerate(betas):
        while e < len(events) and events[e][0] <= beta:
            _, node = events[e]
            e += 1
            rows = reach[node]
            if rows.size == 0:
                continue
            output = path.outputs[node]
            if cls:
                new_loss = (val.targets[rows] != output).astype(np.float64)
            else:
                new_loss = ((val.targets[rows] - output) ** 2).sum(axis=1)
            total += float(new_loss.sum() - row_loss[rows].sum())
            row_loss[rows] = new_loss
        out[ci] = total / val.n
    return out


def prune_select(
    tree: Tree,
    data: Dataset,
    k: int,
    rule: str = "one_se",
    seed: int = 0,
    params: CartParams = CartParams(),
) -> Tree:
    """Pick a pruning level by k-fold cross-validation and prune ``tree`` there.

    Each fold re-grows a tree on its training part with the same parameters
    and prunes it along its own path; candidates are representative alphas of
    the full-data path.  ``min`` picks the candidate with the smallest mean
    CV loss (ties toward the larger alpha); ``one_se`` picks the largest
    alpha whose mean CV loss is within one standard error of that minimum.
    """
    from .dataset import kfold  # local import keeps module load order flat

    if rule not in ("min", "one_se"):
        raise ValueError(f"unknown pruning rule {rule!r}")
    path = pruning_path(tree, data)
    betas = _candidate_alphas(path.alphas)
    folds = kfold(data.n, k, seed)
    losses = np.empty((k, betas.size))
    for f in range(k):
        train_rows, val_rows = folds.indices(f)
        fold_train = data.subset(train_rows)
        fold_tree = grow(fold_train, params)
        fold_path = pruning_path(fold_tree, fold_train)
        losses[f] = _sweep_losses(fold_path, data.subset(val_rows), betas)
    mean = losses.mean(axis=0)
    se = losses.std(axis=0, ddof=1) / np.sqrt(k)
    j_min = int(mean.size - 1 - np.argmin(mean[::-1]))  # ties -> larger alpha
    if rule == "min":
        chosen = j_min
    else:
        limit = mean[j_min] + se[j_min]
        chosen = int(np.flatnonzero(mean <= limit).max())
    return path.tree(chosen)
