"""Binary decision trees with axis-aligned or hyperplane splits and constant leaves.

Nodes live in an index-addressed arena so per-node parameter replacement and
serialization stay cheap.  Routing convention: an input goes to the right
child iff ``x[feature] >= threshold`` (axis split) or ``w . x >= bias``
(oblique split); an axis split is the oblique rule with a one-hot weight
vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, Task

MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Malformed or unsupported serialized model."""


@dataclass
class AxisSplit:
    feature: int
    threshold: float


@dataclass
class ObliqueSplit:
    weights: np.ndarray
    bias: float


@dataclass
class Leaf:
    output: object  # class index (int) or (K,) float vector


@dataclass
class Node:
    kind: object
    left: int = -1
    right: int = -1
    parent: int = -1


class Tree:
    """Strictly binary tree: every internal node has exactly two children."""

    def __init__(self, task: Task, nodes: list[Node], root: int = 0):
        self.task = task
        self.nodes = nodes
        self.root = root
        self._validate()

    # -- structure ----------------------------------------------------------

    def _validate(self):
        if not self.nodes or not 0 <= self.root < len(self.nodes):
            raise ValueError("tree must have a valid root node")
        seen = set()
        stack = [(self.root, -1)]
        while stack:
            i, parent = stack.pop()
            if i in seen:
                raise ValueError("tree contains a cycle or shared node")
            seen.add(i)
            node = self.nodes[i]
            node.parent = parent
            if isinstance(node.kind, Leaf):
                if node.left != -1 or node.right != -1:
                    raise ValueError(f"leaf node {i} has children")
                out = node.kind.output
                if self.task.is_classification:
                    if not isinstance(out, (int, np.integer)) or not 1 <= out <= self.task.k:
                        raise ValueError(f"leaf {i}: class output must lie in 1..{self.task.k}")
                else:
                    vec = np.asarray(out, dtype=np.float64).reshape(-1)
                    if vec.shape != (self.task.k,):
                        raise ValueError(f"leaf {i}: regression output must have length {self.task.k}")
                    node.kind.output = vec
            elif isinstance(node.kind, (AxisSplit, ObliqueSplit)):
                if node.left == -1 or node.right == -1:
                    raise ValueError(f"internal node {i} must have two children")
                if isinstance(node.kind, ObliqueSplit):
                    node.kind.weights = np.asarray(node.kind.weights, dtype=np.float64).reshape(-1)
                stack.append((node.left, i))
                stack.append((node.right, i))
            else:
                raise ValueError(f"node {i} has unknown kind {type(node.kind).__name__}")
        if len(seen) != len(self.nodes):
            raise ValueError("every node must be reachable from the root")

    def is_leaf(self, i: int) -> bool:
        return isinstance(self.nodes[i].kind, Leaf)

    def bfs_order(self) -> list[int]:
        order = [self.root]
        pos = 0
        while pos < len(order):
            node = self.nodes[order[pos]]
            pos += 1
            if not isinstance(node.kind, Leaf):
                order.append(node.left)
                order.append(node.right)
        return order

    def node_depths(self) -> dict[int, int]:
        depths = {self.root: 0}
        for i in self.bfs_order():
            node = self.nodes[i]
            if not isinstance(node.kind, Leaf):
                depths[node.left] = depths[i] + 1
                depths[node.right] = depths[i] + 1
        return depths

    def depth(self) -> int:
        return max(self.node_depths().values())

    def leaf_ids(self) -> list[int]:
        return [i for i in self.bfs_order() if self.is_leaf(i)]

    def internal_ids(self) -> list[int]:
        return [i for i in self.bfs_order() if not self.is_leaf(i)]

    def num_leaves(self) -> int:
        return len(self.leaf_ids())

    def num_nodes(self) -> int:
        return len(self.nodes)

    def copy(self) -> "Tree":
        nodes = []
        for node in self.nodes:
            kind = node.kind
            if isinstance(kind, AxisSplit):
                kind = AxisSplit(kind.feature, kind.threshold)
            elif isinstance(kind, ObliqueSplit):
                kind = ObliqueSplit(kind.weights.copy(), kind.bias)
            else:
                out = kind.output
                kind = Leaf(out.copy() if isinstance(out, np.ndarray) else out)
            nodes.append(Node(kind, node.left, node.right, node.parent))
        return Tree(self.task, nodes, self.root)

    # -- routing and prediction ---------------------------------------------

    def _goes_right(self, i: int, X: np.ndarray) -> np.ndarray:
        kind = self.nodes[i].kind
        if isinstance(kind, AxisSplit):
            return X[:, kind.feature] >= kind.threshold
        return X @ kind.weights >= kind.bias

    def route_many(self, X: np.ndarray, start: int | None = None) -> np.ndarray:
        """Leaf index reached by each row of X, descending from ``start``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("expected a 2-d matrix of inputs")
        self._check_dim(X.shape[1])
        out = np.empty(X.shape[0], dtype=np.int64)
        pending = [(self.root if start is None else start, np.arange(X.shape[0]))]
        while pending:
            i, rows = pending.pop()
            if rows.size == 0:
                continue
            node = self.nodes[i]
            if isinstance(node.kind, Leaf):
                out[rows] = i
                continue
            right = self._goes_right(i, X[rows])
            pending.append((node.left, rows[~right]))
            pending.append((node.right, rows[right]))
        return out

    def _check_dim(self, d: int):
        for node in self.nodes:
            kind = node.kind
            if isinstance(kind, AxisSplit) and kind.feature >= d:
                raise ValueError(f"input dimension {d} too small for feature {kind.feature}")
            if isinstance(kind, ObliqueSplit) and kind.weights.shape[0] != d:
                raise ValueError(
                    f"input dimension {d} does not match weight vector of length {kind.weights.shape[0]}"
                )

    def predict(self, x: np.ndarray):
        """Route one input to a leaf and return its output."""
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        leaf = self.route_many(x)[0]
        return self.nodes[leaf].kind.output

    def predict_many(self, X: np.ndarray, start: int | None = None) -> np.ndarray:
        leaves = self.route_many(X, start=start)
        if self.task.is_classification:
            lut = np.zeros(len(self.nodes), dtype=np.int64)
            for i in self.leaf_ids():
                lut[i] = self.nodes[i].kind.output
            return lut[leaves]
        out = np.empty((leaves.shape[0], self.task.k))
        for i in np.unique(leaves):
            out[leaves == i] = self.nodes[i].kind.output
        return out


def reaching_partition(tree: Tree, X: np.ndarray) -> dict[int, np.ndarray]:
    """Row indices of X passing through each node on their root-to-leaf path."""
    X = np.asarray(X, dtype=np.float64)
    tree._check_dim(X.shape[1])
    sets = {tree.root: np.arange(X.shape[0])}
    for i in tree.bfs_order():
        node = tree.nodes[i]
        if isinstance(node.kind, Leaf):
            continue
        rows = sets[i]
        if rows.size == 0:
            empty = rows
            sets[node.left] = empty
            sets[node.right] = empty
            continue
        right = tree._goes_right(i, X[rows])
        sets[node.left] = rows[~right]
        sets[node.right] = rows[right]
    return sets


def trees_equal(a: Tree, b: Tree) -> bool:
    """Structural and parameter equality (floats compared exactly)."""
    if a.task != b.task or len(a.nodes) != len(b.nodes):
        return False
    stack = [(a.root, b.root)]
    while stack:
        i, j = stack.pop()
        ka, kb = a.nodes[i].kind, b.nodes[j].kind
        if type(ka) is not type(kb):
            return False
        if isinstance(ka, AxisSplit):
            if ka.feature != kb.feature or ka.threshold != kb.threshold:
                return False
        elif isinstance(ka, ObliqueSplit):
            if ka.bias != kb.bias or not np.array_equal(ka.weights, kb.weights):
                return False
        else:
            if isinstance(ka.output, np.ndarray):
                if not np.array_equal(ka.output, kb.output):
                    return False
            elif ka.output != kb.output:
                return False
            continue
        stack.append((a.nodes[i].left, b.nodes[j].left))
        stack.append((a.nodes[i].right, b.nodes[j].right))
    return True


def complete_tree(depth: int, d: int, task: Task, rng_seed: int) -> Tree:
    """Complete binary tree of the given depth with random oblique splits.

    Weights and biases are i.i.d. uniform on [-1, 1].  Classification leaves
    get uniform random labels so the initial tree has a well-defined training
    objective; regression leaves start at zero.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    rng = np.random.default_rng(rng_seed)
    nodes: list[Node] = []

    def build(level: int) -> int:
        i = len(nodes)
        if level == depth:
            if task.is_classification:
                out = int(rng.integers(1, task.k + 1))
            else:
                out = np.zeros(task.k)
            nodes.append(Node(Leaf(out)))
        else:
            kind = ObliqueSplit(rng.uniform(-1.0, 1.0, size=d), float(rng.uniform(-1.0, 1.0)))
            nodes.append(Node(kind))
            nodes[i].left = build(level + 1)
            nodes[i].right = build(level + 1)
        return i

    build(0)
    return Tree(task, nodes, root=0)


def prune_dead(tree: Tree, data: Dataset) -> Tree:
    """Remove branches no training row reaches.

    Routes every row; nodes with an empty reaching set are dropped and an
    internal node left with a single surviving child is replaced by that
    child.  Predictions on the training rows are unchanged.
    """
    reach = reaching_partition(tree, data.features)
    counts = {i: rows.size for i, rows in reach.items()}
    nodes: list[Node] = []

    def rebuild(i: int) -> int:
        node = tree.nodes[i]
        if not isinstance(node.kind, Leaf):
            lc, rc = counts[node.left], counts[node.right]
            if lc == 0:
                return rebuild(node.right)
            if rc == 0:
                return rebuild(node.left)
        j = len(nodes)
        kind = node.kind
        if isinstance(kind, AxisSplit):
            kind = AxisSplit(kind.feature, kind.threshold)
        elif isinstance(kind, ObliqueSplit):
            kind = ObliqueSplit(kind.weights.copy(), kind.bias)
        else:
            out = kind.output
            kind = Leaf(out.copy() if isinstance(out, np.ndarray) else out)
        nodes.append(Node(kind))
        if not isinstance(kind, Leaf):
            nodes[j].left = rebuild(tree.nodes[i].left)
            nodes[j].right = rebuild(tree.nodes[i].right)
        return j

    rebuild(tree.root)
    return Tree(tree.task, nodes, root=0)


# -- serialization -----------------------------------------------------------


def serialize(tree: Tree) -> bytes:
    """Versioned JSON text; float values round-trip exactly via repr."""
    nodes = []
    for i, node in enumerate(tree.nodes):
        kind = node.kind
        if isinstance(kind, AxisSplit):
            entry = {
                "id": i,
                "kind": "axis",
                "params": {"feature": kind.feature, "threshold": kind.threshold},
                "left": node.left,
                "right": node.right,
            }
        elif isinstance(kind, ObliqueSplit):
            entry = {
                "id": i,
                "kind": "oblique",
                "params": {"weights": [float(w) for w in kind.weights], "bias": kind.bias},
                "left": node.left,
                "right": node.right,
            }
        else:
            out = kind.output
            value = int(out) if tree.task.is_classification else [float(v) for v in out]
            entry = {"id": i, "kind": "leaf", "params": {"output": value}, "left": -1, "right": -1}
        nodes.append(entry)
    doc = {
        "version": MODEL_VERSION,
        "task": {"kind": tree.task.kind, "k": tree.task.k},
        "root": tree.root,
        "nodes": nodes,
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def deserialize(blob: bytes) -> Tree:
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"malformed model file: {e}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("malformed model file: expected an object")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unknown model version {doc.get('version')!r}")
    try:
        task = Task(doc["task"]["kind"], int(doc["task"]["k"]))
        entries = doc["nodes"]
        nodes = [None] * len(entries)
        for entry in entries:
            params = entry["params"]
            if entry["kind"] == "axis":
                kind = AxisSplit(int(params["feature"]), float(params["threshold"]))
            elif entry["kind"] == "oblique":
                kind = ObliqueSplit(np.array(params["weights"], dtype=np.float64), float(params["bias"]))
            elif entry["kind"] == "leaf":
                out = params["output"]
                kind = Leaf(int(out) if task.is_classification else np.array(out, dtype=np.float64))
            else:
                raise ModelFormatError(f"unknown node kind {entry['kind']!r}")
            nodes[entry["id"]] = Node(kind, int(entry["left"]), int(entry["right"]))
        if any(n is None for n in nodes):
            raise ModelFormatError("node ids must cover 0..len(nodes)-1")
        return Tree(task, nodes, root=int(doc["root"]))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, IndexError, ValueError) as e:
        raise ModelFormatError(f"malformed model file: {e}") from None


# -- rule export --------------------------------------------------------------


def _format_condition(kind, geq: bool) -> str:
    op = "≥" if geq else "<"
    if isinstance(kind, AxisSplit):
        return f"x[{kind.feature}] {op} {kind.threshold:g}"
    terms = [f"{kind.weights[j]:g}·x[{j}]" for j in np.flatnonzero(kind.weights != 0.0)]
    lhs = " + ".join(terms) if terms else "0"
    return f"{lhs} {op} {kind.bias:g}"


def _format_output(tree: Tree, out) -> str:
    if tree.task.is_classification:
        return f"class {int(out)}"
    return "(" + ", ".join(f"{v:g}" for v in out) + ")"


def export_rules(tree: Tree) -> str:
    """One IF-THEN rule per leaf, in left-to-right leaf order.

    Each rule is the conjunction of the edge conditions on the root-to-leaf
    path; oblique conditions print only the nonzero weights.
    """
    rules: list[str] = []

    def walk(i: int, conds: list[str]):
        node = tree.nodes[i]
        if isinstance(node.kind, Leaf):
            lhs = " AND ".join(conds) if conds else "TRUE"
            rules.append(f"{lhs} → {_format_output(tree, node.kind.output)}")
            return
        walk(node.left, conds + [_format_condition(node.kind, geq=False)])
        walk(node.right, conds + [_format_condition(node.kind, geq=True)])

    walk(tree.root, [])
    return "\n".join(rules) + "\n"
