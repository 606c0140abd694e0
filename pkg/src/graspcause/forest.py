"""Sub-sampled honest forests for final-stage CATE estimation.

A forest solves the local moment ``sum_i w_i(x) (num_i - theta den_i) = 0``
with kernel weights ``w_i(x)`` from honest trees, i.e.
``theta(x) = sum w num / sum w den``. With ``num = res_y * res_t`` and
``den = res_t**2`` this is the residual-on-residual causal forest; with
``den = 1`` it is a regression forest of ``num``.

Trees come in little bags: each bag draws a half-sample, each tree in the
bag subsamples from it and splits its subsample into a structure half and an
estimation half. Between- and within-bag spread gives the variance.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .learners import n_threads
from .trees import Tree, grow

log = logging.getLogger(__name__)

DEN_FLOOR = 1e-8


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    subsample: float = 0.45
    honesty: float = 0.5
    bag_size: int = 4
    min_leaf: int = 5
    max_depth: int | None = None

    def __post_init__(self):
        if self.bag_size < 2 or self.n_trees % self.bag_size:
            raise ValueError("n_trees must be a positive multiple of bag_size >= 2")
        if not 0 < self.subsample <= 0.5:
            raise ValueError("subsample must lie in (0, 0.5]")
        if not 0 < self.honesty < 1:
            raise ValueError("honesty must lie in (0, 1)")


@dataclass
class _FittedTree:
    tree: Tree
    leaf_num: np.ndarray
    leaf_den: np.ndarray


class HonestForest:
    def __init__(self, config: ForestConfig = ForestConfig(), seed: int = 0):
        self.config = config
        self.seed = seed
        self.trees: list[_FittedTree] = []

    def fit(self, x, num, den) -> "HonestForest":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        num = np.asarray(num, dtype=float)
        den = np.asarray(den, dtype=float)
        n = num.size
        cfg = self.config
        size = max(2 * cfg.min_leaf, math.ceil(cfg.subsample * n))
        if size > n // 2:
            size = n // 2
        self._global = float(num.sum() / den.sum()) if den.sum() > DEN_FLOOR else 0.0

        def relabel(rows):
            d = den[rows].sum()
            theta = num[rows].sum() / d if d > DEN_FLOOR else 0.0
            return num[rows] - theta * den[rows]

        def fit_bag(g):
            rng = np.random.default_rng([self.seed, g])
            half = rng.choice(n, n // 2, replace=False)
            out = []
            for j in range(cfg.bag_size):
                trng = np.random.default_rng([self.seed, g, j])
                sub = trng.choice(half, size, replace=False)
                cut = int(round(cfg.honesty * size))
                split_rows, est_rows = np.sort(sub[:cut]), np.sort(sub[cut:])
                tree = grow(x, split_rows, relabel, cfg.min_leaf, cfg.max_depth, est_rows)
                leaves = tree.apply(x[est_rows])
                count = np.bincount(leaves, minlength=tree.n_nodes).astype(float)
                with np.errstate(invalid="ignore", divide="ignore"):
                    leaf_num = np.bincount(leaves, num[est_rows], tree.n_nodes) / count
                    leaf_den = np.bincount(leaves, den[est_rows], tree.n_nodes) / count
                out.append(_FittedTree(tree, leaf_num, leaf_den))
            return out

        bags = cfg.n_trees // cfg.bag_size
        workers = n_threads()
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(fit_bag, range(bags)))
        else:
            results = [fit_bag(g) for g in range(bags)]
        self.trees = [t for bag in results for t in bag]
        self.n_features = x.shape[1]
        return self

    def _moments(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        N = np.empty((len(self.trees), x.shape[0]))
        D = np.empty_like(N)
        for b, ft in enumerate(self.trees):
            leaves = ft.tree.apply(x)
            N[b] = ft.leaf_num[leaves]
            D[b] = ft.leaf_den[leaves]
        return N, D

    def predict(self, x) -> np.ndarray:
        return self.predict_with_variance(x)[0]

    def predict_with_variance(self, x):
        """Per-point estimates, per-tree linearised estimates, and fallback mask."""
        N, D = self._moments(x)
        n_mean, d_mean = N.mean(axis=0), D.mean(axis=0)
        fallback = d_mean < DEN_FLOOR
        if fallback.any():
            log.warning("forest denominator below %g at %d points; using the global ratio",
                        DEN_FLOOR, int(fallback.sum()))
        safe = np.where(fallback, 1.0, d_mean)
        theta = np.where(fallback, self._global, n_mean / safe)
        per_tree = theta + np.where(fallback, 0.0, (N - theta * D) / safe)
        return theta, per_tree, fallback

    def mean_effect_variance(self, per_tree: np.ndarray) -> float:
        """Little-bags variance of the sample-mean effect.

        Bag means vary through both the half-sample and the finite number of
        trees per bag; the second part is removed using the within-bag spread.
        Falls back to the raw between-bag variance when the correction
        overshoots.
        """
        e = per_tree.mean(axis=1).reshape(-1, self.config.bag_size)
        bag_means = e.mean(axis=1)
        between = float(np.mean((bag_means - bag_means.mean()) ** 2))
        within = float(np.mean(e.var(axis=1, ddof=1)))
        corrected = between - within / self.config.bag_size
        return corrected if corrected > 0 else between
