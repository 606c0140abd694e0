"""Axis-aligned binary trees grown by between-child sum-of-squares gain.

Shared by the honest forests and the CATE interpretation tree. Ties are
broken by lowest feature index, then lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def best_split(X: np.ndarray, r: np.ndarray, min_leaf: int, X_est: np.ndarray | None = None):
    """Best ``(feature, threshold, gain)`` for splitting targets ``r``, or None.

    The gain is ``S_L^2/n_L + S_R^2/n_R - S^2/n``; for centred targets this is
    the reduction in squared error. When ``X_est`` is given, every child must
    also receive ``min_leaf`` of those (estimation) rows.
    """
    n = r.size
    if n < 2 * min_leaf:
        return None
    total = r.sum()
    base = total * total / n
    best = None
    sizes = np.arange(1, n)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cs = np.cumsum(r[order])[:-1]
        valid = (xs[:-1] < xs[1:]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        thresholds = (xs[:-1] + xs[1:]) / 2
        # guard against midpoints rounding onto the upper value
        thresholds = np.where(thresholds >= xs[1:], xs[:-1], thresholds)
        if X_est is not None:
            est_sorted = np.sort(X_est[:, j])
            n_left = np.searchsorted(est_sorted, thresholds, side="right")
            valid &= (n_left >= min_leaf) & (est_sorted.size - n_left >= min_leaf)
        if not valid.any():
            continue
        score = cs**2 / sizes + (total - cs) ** 2 / (n - sizes) - base
        score = np.where(valid, score, -np.inf)
        i = int(np.argmax(score))
        gain = float(score[i])
        if gain > 1e-12 * max(1.0, abs(base)) and (best is None or gain > best[2]):
            best = (j, float(thresholds[i]), gain)
    return best


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id for each row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node


def grow(
    X: np.ndarray,
    split_rows: np.ndarray,
    relabel: Callable[[np.ndarray], np.ndarray],
    min_leaf: int,
    max_depth: int | None = None,
    est_rows: np.ndarray | None = None,
) -> Tree:
    """Grow a tree on ``split_rows`` of ``X``.

    ``relabel(rows)`` returns the split targets for the rows in a node, so
    that node-dependent pseudo-outcomes can be recomputed at every node.
    """
    feature, threshold, left, right, depth = [], [], [], [], []

    def new(d):
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        depth.append(d)
        return len(feature) - 1

    stack = [(new(0), np.asarray(split_rows), None if est_rows is None else np.asarray(est_rows), 0)]
    while stack:
        node, rows, est, d = stack.pop()
        if max_depth is not None and d >= max_depth:
            continue
        found = best_split(X[rows], relabel(rows), min_leaf, None if est is None else X[est])
        if found is None:
            continue
        j, thr, _ = found
        feature[node], threshold[node] = j, thr
        go = X[rows, j] <= thr
        l, r = new(d + 1), new(d + 1)
        left[node], right[node] = l, r
        if est is None:
            stack.append((r, rows[~go], None, d + 1))
            stack.append((l, rows[go], None, d + 1))
        else:
            ego = X[est, j] <= thr
            stack.append((r, rows[~go], est[~ego], d + 1))
            stack.append((l, rows[go], est[ego], d + 1))
    return Tree(
        np.array(feature, dtype=int),
        np.array(threshold, dtype=float),
        np.array(left, dtype=int),
        np.array(right, dtype=int),
        np.array(depth, dtype=int),
    )
