"""Shallow regression trees over per-row CATE, with sign/intensity colouring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trees import grow

NEUTRAL_BAND = 0.05
STRONG_LEVEL = 0.15
MIN_LEAF = 5

_FILL = {
    ("negative", "strong"): "#b2182b",
    ("negative", "weak"): "#f4a582",
    ("neutral", None): "#ffffff",
    ("positive", "weak"): "#a6dba0",
    ("positive", "strong"): "#1b7837",
}


@dataclass(frozen=True)
class ColorClass:
    direction: str  # negative | neutral | positive
    intensity: str | None = None  # weak | strong; None for neutral

    @property
    def fill(self) -> str:
        return _FILL[(self.direction, self.intensity)]

    def __str__(self) -> str:
        return self.direction if self.intensity is None else f"{self.direction}/{self.intensity}"


def classify_color(mean_cate: float, neutral: float = NEUTRAL_BAND, strong: float = STRONG_LEVEL) -> ColorClass:
    magnitude = abs(mean_cate)
    if magnitude <= neutral:
        return ColorClass("neutral")
    direction = "positive" if mean_cate > 0 else "negative"
    return ColorClass(direction, "strong" if magnitude >= strong else "weak")


@dataclass(frozen=True)
class TreeNode:
    id: int
    n: int
    mean_cate: float
    color: ColorClass
    feature: str | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None
    depth: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(frozen=True)
class InterpretTree:
    nodes: tuple[TreeNode, ...]
    max_depth: int
    feature_names: tuple[str, ...]

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def leaves(self) -> list[TreeNode]:
        return [node for node in self.nodes if node.is_leaf]

    def apply(self, x) -> np.ndarray:
        """Leaf id for each row."""
        x = np.asarray(x, dtype=float).reshape(-1, len(self.feature_names))
        out = np.empty(x.shape[0], dtype=int)
        for i, row in enumerate(x):
            node = self.root
            while not node.is_leaf:
                j = self.feature_names.index(node.feature)
                node = self.nodes[node.left if row[j] <= node.threshold else node.right]
            out[i] = node.id
        return out

    def leaf_table(self) -> list[dict]:
        """One row per leaf: the split path, n, mean CATE and colour."""
        paths = {0: []}
        for node in self.nodes:
            if not node.is_leaf:
                thr = f"{node.threshold:.6g}"
                paths[node.left] = paths[node.id] + [f"{node.feature} <= {thr}"]
                paths[node.right] = paths[node.id] + [f"{node.feature} > {thr}"]
        return [
            {"path": " & ".join(paths[leaf.id]) or "(all)", "n": leaf.n,
             "mean_cate": leaf.mean_cate, "color": str(leaf.color)}
            for leaf in self.leaves()
        ]


def fit_cate_tree(x, cate, max_depth: int = 2, feature_names: Sequence[str] | None = None,
                  min_leaf: int = MIN_LEAF, neutral: float = NEUTRAL_BAND,
                  strong: float = STRONG_LEVEL) -> InterpretTree:
    """Least-squares regression tree of CATE values on heterogeneity features."""
    cate = np.asarray(cate, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(cate.size, -1)
    if cate.size < 10:
        raise ValueError("need at least 10 rows")
    if not 1 <= max_depth <= 4:
        raise ValueError("max_depth must lie in [1, 4]")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(x.shape[1]))
    if len(names) != x.shape[1]:
        raise ValueError("feature_names does not match the number of columns")
    centred = cate - cate.mean()
    tree = grow(x, np.arange(cate.size), lambda rows: centred[rows], min_leaf, max_depth)
    # routed rows per node: a row belongs to every node on its root-leaf path
    members = {0: np.arange(cate.size)}
    nodes = []
    for node in range(tree.n_nodes):
        rows = members[node]
        mean = float(cate[rows].mean())
        color = classify_color(mean, neutral, strong)
        if tree.feature[node] < 0:
            nodes.append(TreeNode(node, rows.size, mean, color, depth=int(tree.depth[node])))
            continue
        j, thr = int(tree.feature[node]), float(tree.threshold[node])
        go = x[rows, j] <= thr
        members[int(tree.left[node])] = rows[go]
        members[int(tree.right[node])] = rows[~go]
        nodes.append(TreeNode(node, rows.size, mean, color, names[j], thr,
                              int(tree.left[node]), int(tree.right[node]), int(tree.depth[node])))
    return InterpretTree(tuple(nodes), max_depth, names)


def render_dot(tree: InterpretTree, title: str | None = None) -> str:
    lines = ["digraph cate_tree {", '  node [shape=box, style="rounded,filled", fontname="Helvetica"];']
    if title:
        lines.append(f'  label="{title}";')
    for node in tree.nodes:
        stats = f"n = {node.n}\\nCATE = {node.mean_cate:+.3f}"
        label = f"{node.feature} <= {node.threshold:.6g}\\n{stats}" if not node.is_leaf else stats
        lines.append(f'  n{node.id} [label="{label}", fillcolor="{node.color.fill}"];')
    for node in tree.nodes:
        if not node.is_leaf:
            lines.append(f'  n{node.id} -> n{node.left} [label="yes"];')
            lines.append(f'  n{node.id} -> n{node.right} [label="no"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
