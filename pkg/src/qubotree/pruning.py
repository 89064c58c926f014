"""Cost-complexity pruning, subtree selection, and the evaluation protocol.

The weakest-link ladder repeatedly collapses every internal node attaining
the minimal per-leaf risk increase g(t) = (R(t) - R(subtree_t)) / (leaves - 1),
yielding a nested subtree sequence with non-decreasing complexity parameters.
A validation set picks the final subtree; the test set is touched only for
reporting.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .datasets import DataError, Dataset, SplitSpecification, partition
from .tree import GrowConfig, RegressionTree, TreeNode, grow


@dataclass(frozen=True)
class PruneStep:
    """One rung of the ladder: the complexity parameter at which the tree
    shrank to this shape, plus the newly collapsed node ids (an antichain)."""

    alpha: float
    tree: RegressionTree
    leaves: int
    train_risk: float
    collapsed: tuple = ()


class _Work:
    """Mutable pruning state over one immutable tree."""

    def __init__(self, tree: RegressionTree, n_train: int):
        self.n_train = n_train
        self.node: dict = {}
        self.parent: dict = {}
        self.depth: dict = {}
        self.leaves_under: dict = {}
        self.leaf_sse: dict = {}
        self.internal: set = set()

        def walk(node: TreeNode, parent_id, depth):
            self.node[node.id] = node
            self.parent[node.id] = parent_id
            self.depth[node.id] = depth
            if node.is_leaf:
                self.leaves_under[node.id] = 1
                self.leaf_sse[node.id] = node.sse
                return
            self.internal.add(node.id)
            walk(node.left, node.id, depth + 1)
            walk(node.right, node.id, depth + 1)
            self.leaves_under[node.id] = (
                self.leaves_under[node.left.id] + self.leaves_under[node.right.id]
            )
            self.leaf_sse[node.id] = self.leaf_sse[node.left.id] + self.leaf_sse[node.right.id]

        walk(tree.root, None, 0)
        self.root_id = tree.root.id

    def g(self, node_id: int) -> float:
        node = self.node[node_id]
        extra_leaves = self.leaves_under[node_id] - 1
        return (node.sse - self.leaf_sse[node_id]) / self.n_train / extra_leaves

    def collapse(self, node_id: int) -> None:
        """Make node_id a leaf; fix ancestor aggregates and drop its internals."""
        node = self.node[node_id]
        delta_leaves = 1 - self.leaves_under[node_id]
        delta_sse = node.sse - self.leaf_sse[node_id]

        def drop(sub: TreeNode):
            self.internal.discard(sub.id)
            if not sub.is_leaf:
                drop(sub.left)
                drop(sub.right)

        drop(node)
        self.leaves_under[node_id] = 1
        self.leaf_sse[node_id] = node.sse
        up = self.parent[node_id]
        while up is not None:
            self.leaves_under[up] += delta_leaves
            self.leaf_sse[up] += delta_sse
            up = self.parent[up]

    def train_risk(self) -> float:
        return self.leaf_sse[self.root_id] / self.n_train

    def total_leaves(self) -> int:
        return self.leaves_under[self.root_id]


def prune_sequence(tree: RegressionTree, n_train: Optional[int] = None):
    """Nested subtree ladder ending at the root-only tree.

    Risks are normalized by the training count so alphas are comparable
    across datasets. All co-minimal weakest links collapse simultaneously,
    including any cascade that re-attains the same alpha, which keeps the
    alpha sequence strictly increasing after the initial zero step. A
    lazy-deletion heap serves the current minimum g; step trees share all
    untouched subtrees with their predecessor.
    """
    n_train = n_train if n_train is not None else tree.n_train
    work = _Work(tree, n_train)
    g_now = {t: work.g(t) for t in work.internal}
    heap = [(g, t) for t, g in g_now.items()]
    heapq.heapify(heap)
    steps = []
    current_root = tree.root

    def peek():
        while heap:
            g, t = heap[0]
            if t in work.internal and g == g_now.get(t):
                return g, t
            heapq.heappop(heap)
        return None

    def collapse_at(threshold: float):
        newly = []
        while True:
            top = peek()
            if top is None or top[0] > threshold:
                break
            _, t = top
            heapq.heappop(heap)
            work.collapse(t)
            g_now.pop(t, None)
            newly.append(t)
            up = work.parent[t]
            while up is not None:
                if up in work.internal:
                    g_now[up] = work.g(up)
                    heapq.heappush(heap, (g_now[up], up))
                up = work.parent[up]
        return newly

    def emit(alpha: float, newly):
        nonlocal current_root
        if newly:
            targets = set(newly)
            dirty = set()
            for t in newly:
                up = work.parent[t]
                while up is not None and up not in dirty:
                    dirty.add(up)
                    up = work.parent[up]

            def rebuild(node: TreeNode) -> TreeNode:
                if node.id in targets:
                    return replace(node, rule=None, left=None, right=None)
                if node.is_leaf or node.id not in dirty:
                    return node
                return replace(node, left=rebuild(node.left), right=rebuild(node.right))

            current_root = rebuild(current_root)
        steps.append(
            PruneStep(
                alpha,
                replace(tree, root=current_root),
                work.total_leaves(),
                work.train_risk(),
                tuple(sorted(newly)),
            )
        )

    emit(0.0, collapse_at(0.0))
    while peek() is not None:
        alpha = peek()[0]
        emit(alpha, collapse_at(alpha * (1.0 + 1e-12)))
    return steps


@dataclass(frozen=True)
class StepEvaluation:
    index: int
    alpha: float
    leaves: int
    train_risk: float
    validation_mse: Optional[float] = None
    test_mse: Optional[float] = None


@dataclass(frozen=True)
class SelectionReport:
    chosen_index: int
    rows: tuple

    @property
    def chosen(self) -> StepEvaluation:
        return self.rows[self.chosen_index]

    def rows_as_dicts(self):
        return [
            {
                "index": r.index,
                "alpha": r.alpha,
                "leaves": r.leaves,
                "train_mse": r.train_risk,
                "validation_mse": r.validation_mse,
                "test_mse": r.test_mse,
            }
            for r in self.rows
        ]


def ladder_mse(steps, data: Dataset, routing: Optional[str] = None) -> np.ndarray:
    """MSE of every ladder step on one dataset, computed incrementally.

    Rows are routed once through the widest tree; each later step only
    re-predicts the rows under its newly collapsed nodes. Equals per-step
    re-evaluation exactly, at a fraction of the cost.
    """
    if data.response is None or data.n_rows == 0:
        raise DataError("evaluation needs a non-empty dataset with responses")
    base = steps[0].tree
    routing = routing or base.config.routing

    # Route once through the widest tree, recording the index set and the
    # training prediction at every node.
    rows_by_node: dict = {}
    prediction_of: dict = {}
    depth_of: dict = {}
    preds = np.empty(data.n_rows, dtype=np.float64)
    stack = [(base.root, np.arange(data.n_rows), 0)]
    while stack:
        node, idx, depth = stack.pop()
        rows_by_node[node.id] = idx
        prediction_of[node.id] = node.prediction
        depth_of[node.id] = depth
        if node.is_leaf:
            preds[idx] = node.prediction
            continue
        mask = _left_mask(base, node, data, idx, routing)
        stack.append((node.left, idx[mask], depth + 1))
        stack.append((node.right, idx[~mask], depth + 1))

    y = data.response
    se = float(np.sum((y - preds) ** 2))
    out = [se / data.n_rows]
    for step in steps[1:]:
        for t in sorted(step.collapsed, key=lambda i: -depth_of[i]):
            idx = rows_by_node[t]
            if len(idx):
                new_pred = prediction_of[t]
                old = preds[idx]
                se += float(np.sum((y[idx] - new_pred) ** 2 - (y[idx] - old) ** 2))
                preds[idx] = new_pred
        out.append(se / data.n_rows)
    return np.asarray(out)


def _left_mask(tree: RegressionTree, node: TreeNode, data: Dataset, idx, routing):
    rule = node.rule
    values = data.column(rule.variable)[idx]
    if rule.kind == "threshold":
        return values < rule.threshold
    col = data.schema_for(rule.variable)
    codes = {lab: i for i, lab in enumerate(col.categories)}
    left_codes = [codes[lab] for lab in rule.left_categories if lab in codes]
    mask = np.isin(values, np.asarray(left_codes, dtype=np.int64))
    if routing == "majority":
        right_codes = [codes[lab] for lab in rule.right_categories if lab in codes]
        known = mask | np.isin(values, np.asarray(right_codes, dtype=np.int64))
        if node.left.n >= node.right.n:
            mask = mask | ~known
    return mask


def select_subtree(steps, validation: Dataset) -> SelectionReport:
    """Pick the ladder step with minimal validation MSE, smaller tree on ties."""
    if not steps:
        raise ValueError("empty prune sequence")
    if validation.response is None or validation.n_rows == 0:
        raise DataError("empty validation set")
    val_mse = ladder_mse(steps, validation)
    rows = tuple(
        StepEvaluation(i, s.alpha, s.leaves, s.train_risk, float(val_mse[i]))
        for i, s in enumerate(steps)
    )
    best = 0
    for i, row in enumerate(rows):
        if row.validation_mse < rows[best].validation_mse or (
            row.validation_mse == rows[best].validation_mse and row.leaves < rows[best].leaves
        ):
            best = i
    return SelectionReport(best, rows)


@dataclass(frozen=True)
class ProtocolRow:
    tree_type: str
    leaves: int
    depth: int
    alpha: float
    train_mse: float
    validation_mse: float
    test_mse: float


@dataclass(frozen=True)
class ProtocolReport:
    """Rows for the root, validation-best, test-best, and maximal trees.

    ``test_best`` is a diagnostic only: selecting on the test set would leak
    it into model choice, so it is never used to pick the returned tree.
    """

    method: str
    rows: tuple
    chosen_index: int
    steps_count: int
    selected_tree: RegressionTree = field(repr=False, compare=False, default=None)

    def row(self, tree_type: str) -> ProtocolRow:
        for r in self.rows:
            if r.tree_type == tree_type:
                return r
        raise KeyError(tree_type)


def evaluate_protocol(
    data: Dataset,
    split_spec: SplitSpecification,
    cfg: Optional[GrowConfig] = None,
) -> ProtocolReport:
    """Partition, grow the maximal tree, prune, select, and score.

    Fractions follow ``split_spec``; the maximal tree is grown with ``cfg``
    (default: the max-tree preset) on the training part only.
    """
    cfg = cfg or GrowConfig.max_tree()
    train, validation, test = partition(data, split_spec)
    max_tree = grow(train, cfg)
    steps = prune_sequence(max_tree, train.n_rows)
    val_mse = ladder_mse(steps, validation)
    test_mse = ladder_mse(steps, test)

    rows = tuple(
        StepEvaluation(i, s.alpha, s.leaves, s.train_risk, float(val_mse[i]), float(test_mse[i]))
        for i, s in enumerate(steps)
    )
    chosen = 0
    for i, row in enumerate(rows):
        if row.validation_mse < rows[chosen].validation_mse or (
            row.validation_mse == rows[chosen].validation_mse
            and row.leaves < rows[chosen].leaves
        ):
            chosen = i
    test_best = int(np.argmin([r.test_mse for r in rows]))

    def report_row(tree_type: str, i: int) -> ProtocolRow:
        step = steps[i]
        return ProtocolRow(
            tree_type,
            step.leaves,
            step.tree.depth(),
            step.alpha,
            step.train_risk,
            rows[i].validation_mse,
            rows[i].test_mse,
        )

    out_rows = (
        report_row("root", len(steps) - 1),
        report_row("validation_best", chosen),
        report_row("test_best", test_best),
        report_row("max", 0),
    )
    return ProtocolReport(cfg.categorical_method, out_rows, chosen, len(steps), steps[chosen].tree)
