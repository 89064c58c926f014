"""Best-split search per variable.

Categorical variables go through the ratio-iteration QUBO pipeline (with an
exhaustive-partition searcher and a sorted-means greedy scan as independent
baselines); numeric and binary variables use the classic sorted threshold
scan. All subset rules are canonicalized so the left side contains the
category with the smallest mean response.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .datasets import ColumnSchema, Dataset
from .dinkelbach import DinkelbachConfig, IterationTrace, dinkelbach_split
from .solvers import SolverConfig
from .stats import aggregate_categories, build_v_matrix


@dataclass(frozen=True)
class SplitRule:
    """Either a category subset rule or a strict ``x < threshold`` rule.

    ``right_categories`` records the categories observed on the right at
    training time; prediction needs it to route labels unseen at this node.
    """

    variable: str
    kind: str
    left_categories: tuple = ()
    right_categories: tuple = ()
    threshold: Optional[float] = None


@dataclass(frozen=True)
class SplitCandidate:
    rule: SplitRule
    cost: float
    n_left: int
    n_right: int
    trace: Optional[IterationTrace] = None


def _observed(codes: np.ndarray):
    observed = np.unique(codes)
    local = np.searchsorted(observed, codes)
    return observed, local


def _subset_candidate(
    column: ColumnSchema,
    observed: np.ndarray,
    aggs,
    left_mask: np.ndarray,
    cost: float,
    trace: Optional[IterationTrace] = None,
) -> SplitCandidate:
    """Assemble a canonical subset rule: smallest-mean category goes left."""
    means = np.array([a.sum / a.n for a in aggs])
    if not left_mask[int(np.argmin(means))]:
        left_mask = ~left_mask
    counts = np.array([a.n for a in aggs])
    left_labels = tuple(column.categories[int(observed[i])] for i in np.flatnonzero(left_mask))
    right_labels = tuple(column.categories[int(observed[i])] for i in np.flatnonzero(~left_mask))
    rule = SplitRule(column.name, "subset", left_labels, right_labels)
    n_left = int(counts[left_mask].sum())
    return SplitCandidate(rule, float(cost), n_left, int(counts.sum()) - n_left, trace)


def best_categorical_split_qubo(
    y: np.ndarray,
    codes: np.ndarray,
    column: ColumnSchema,
    solver_cfg: Optional[SolverConfig] = None,
    dk_cfg: Optional[DinkelbachConfig] = None,
) -> SplitCandidate:
    """Optimal subset split via the iterative binary quadratic pipeline."""
    observed, local = _observed(np.asarray(codes, dtype=np.int64))
    if len(observed) < 2:
        raise ValueError(f"{column.name}: need at least two observed categories")
    aggs, node = aggregate_categories(local, y, len(observed))
    v = build_v_matrix(aggs)
    q, lam, trace = dinkelbach_split(v, aggs, node, solver_cfg, dk_cfg)
    left_mask = np.array(q, dtype=bool)
    return _subset_candidate(column, observed, aggs, left_mask, lam, trace)


def best_categorical_split_exhaustive(
    y: np.ndarray, codes: np.ndarray, column: ColumnSchema
) -> SplitCandidate:
    """Ground-truth subset split by direct enumeration of all partitions.

    Costs come straight from per-category sums, independently of the
    quadratic-form machinery, so this doubles as an oracle for it.
    """
    observed, local = _observed(np.asarray(codes, dtype=np.int64))
    m = len(observed)
    if not 2 <= m <= 22:
        raise ValueError(f"{column.name}: exhaustive search supports 2..22 categories, got {m}")
    aggs, node = aggregate_categories(local, y, m)
    counts = np.array([a.n for a in aggs], dtype=np.float64)
    sums = np.array([a.sum for a in aggs])
    sums_sq = np.array([a.sum_sq for a in aggs])

    # All assignments with the first bit set, visited in lexicographic order
    # (chunked to bound memory) so the first minimum is the lex tie-break.
    best_cost = np.inf
    best_bits = None
    total = 1 << (m - 1)
    for start in range(0, total, 1 << 16):
        patterns = np.arange(start, min(start + (1 << 16), total), dtype=np.int64)
        bits = np.zeros((len(patterns), m), dtype=np.float64)
        bits[:, 0] = 1.0
        for j in range(1, m):
            bits[:, j] = (patterns >> (m - 1 - j)) & 1
        keep = bits.sum(axis=1) < m  # drop the all-ones (trivial) assignment
        bits = bits[keep]
        if not len(bits):
            continue
        nl = bits @ counts
        nr = node.n - nl
        sl = bits @ sums
        ql = bits @ sums_sq
        sse_l = np.maximum(ql - sl * sl / nl, 0.0)
        sse_r = np.maximum((node.sum_sq - ql) - (node.sum - sl) ** 2 / nr, 0.0)
        costs = sse_l + sse_r
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_cost = float(costs[i])
            best_bits = bits[i].astype(bool)
    return _subset_candidate(column, observed, aggs, best_bits, best_cost)


def best_categorical_split_greedy(
    y: np.ndarray, codes: np.ndarray, column: ColumnSchema
) -> SplitCandidate:
    """Classical shortcut: sort categories by mean response, scan prefixes."""
    observed, local = _observed(np.asarray(codes, dtype=np.int64))
    m = len(observed)
    if m < 2:
        raise ValueError(f"{column.name}: need at least two observed categories")
    aggs, node = aggregate_categories(local, y, m)
    means = np.array([a.sum / a.n for a in aggs])
    order = np.argsort(means, kind="stable")
    counts = np.array([a.n for a in aggs], dtype=np.float64)[order]
    sums = np.array([a.sum for a in aggs])[order]
    sums_sq = np.array([a.sum_sq for a in aggs])[order]

    nl = np.cumsum(counts)[:-1]
    sl = np.cumsum(sums)[:-1]
    ql = np.cumsum(sums_sq)[:-1]
    nr = node.n - nl
    sse_l = np.maximum(ql - sl * sl / nl, 0.0)
    sse_r = np.maximum((node.sum_sq - ql) - (node.sum - sl) ** 2 / nr, 0.0)
    costs = sse_l + sse_r
    best = int(np.argmin(costs))
    left_mask = np.zeros(m, dtype=bool)
    left_mask[order[: best + 1]] = True
    return _subset_candidate(column, observed, aggs, left_mask, costs[best])


def best_numeric_split(
    y: np.ndarray, x: np.ndarray, variable: str, min_bucket: int = 1
) -> SplitCandidate:
    """Threshold scan over midpoints between consecutive distinct values."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    if xs[0] == xs[-1]:
        raise ValueError(f"{variable}: constant at this node")
    cuts = np.flatnonzero(xs[:-1] < xs[1:])  # left part ends at position i
    lo, hi = min_bucket - 1, n - min_bucket
    cuts = cuts[(cuts >= lo) & (cuts < hi)]
    if len(cuts) == 0:
        raise ValueError(f"{variable}: no threshold satisfies the bucket minimum")

    sl = np.cumsum(ys)
    ql = np.cumsum(ys * ys)
    nl = (cuts + 1).astype(np.float64)
    nr = n - nl
    sse_l = np.maximum(ql[cuts] - sl[cuts] ** 2 / nl, 0.0)
    sse_r = np.maximum((ql[-1] - ql[cuts]) - (sl[-1] - sl[cuts]) ** 2 / nr, 0.0)
    costs = sse_l + sse_r
    best = int(np.argmin(costs))  # first minimum = smallest threshold
    threshold = 0.5 * (xs[cuts[best]] + xs[cuts[best] + 1])
    rule = SplitRule(variable, "threshold", threshold=float(threshold))
    return SplitCandidate(rule, float(costs[best]), int(nl[best]), int(nr[best]))


def best_split(
    data: Dataset,
    indices: np.ndarray,
    method: str = "qubo",
    solver_cfg: Optional[SolverConfig] = None,
    dk_cfg: Optional[DinkelbachConfig] = None,
    min_bucket: int = 1,
) -> Optional[SplitCandidate]:
    """Minimum-cost candidate across all eligible variables.

    Ties break toward the earlier schema column. Categorical candidates that
    leave a child below ``min_bucket`` are dropped rather than re-searched,
    identically for every method, so method comparisons stay aligned.
    """
    y = data.response[indices]
    best: Optional[SplitCandidate] = None
    for column in data.schema:
        values = data.column(column.name)[indices]
        try:
            if column.kind == "categorical":
                if method == "greedy":
                    cand = best_categorical_split_greedy(y, values, column)
                elif method == "exhaustive":
                    cand = best_categorical_split_exhaustive(y, values, column)
                else:
                    cand = best_categorical_split_qubo(y, values, column, solver_cfg, dk_cfg)
                if cand.n_left < min_bucket or cand.n_right < min_bucket:
                    continue
            else:
                cand = best_numeric_split(y, values, column.name, min_bucket)
        except ValueError:
            continue
        if best is None or cand.cost < best.cost:
            best = cand
    return best
