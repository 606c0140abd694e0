"""First-stage nuisance learners with cross-validated grid search and cross-fitting.

Forest and boosting families are backed by scikit-learn; selection, fold
construction and cross-fitting are done here so that the same folds can be
shared across candidate families.
"""

from __future__ import annotations

import itertools
import logging
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.ensemble import (
    GradientBoostingClassifier,
    GradientBoostingRegressor,
    RandomForestClassifier,
    RandomForestRegressor,
)
from sklearn.linear_model import LinearRegression

log = logging.getLogger(__name__)

CLASSIFIERS = {"RandomForestClassifier", "GradientBoostingClassifier"}
REGRESSORS = {"RandomForestRegressor", "GradientBoostingRegressor", "LinearRegression"}
FAMILIES = CLASSIFIERS | REGRESSORS
GRID_PARAMS = {"max_depth", "min_samples_leaf", "n_estimators"}
PROB_CLIP = 1e-6
FOREST_TREES = 100
LEARNING_RATE = 0.1


class LearnerError(ValueError):
    pass


def n_threads() -> int:
    """Parallelism cap from ``GRASPCAUSE_THREADS`` (results never depend on it)."""
    try:
        return max(1, int(os.environ.get("GRASPCAUSE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    grid: Mapping[str, Sequence] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise LearnerError(f"unknown learner family {self.family!r}")
        grid = {k: tuple(v) for k, v in dict(self.grid).items()}
        if self.family != "LinearRegression":
            if not grid or any(len(v) == 0 for v in grid.values()):
                raise LearnerError("grid must be non-empty")
        bad = set(grid) - GRID_PARAMS
        if bad:
            raise LearnerError(f"unsupported grid parameters {sorted(bad)}")
        object.__setattr__(self, "grid", grid)

    @property
    def is_classifier(self) -> bool:
        return self.family in CLASSIFIERS

    def candidates(self) -> list[dict]:
        names = sorted(self.grid)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.grid[n] for n in names))]

    def with_seed(self, seed: int) -> "LearnerSpec":
        return LearnerSpec(self.family, self.grid, seed)

    def to_dict(self) -> dict:
        return {"family": self.family, "grid": {k: list(v) for k, v in self.grid.items()}, "seed": self.seed}


# grids for the four nuisance families
DEFAULT_GRIDS = {
    "RandomForestRegressor": {"max_depth": [3, None], "min_samples_leaf": [10, 50]},
    "GradientBoostingRegressor": {"n_estimators": [50, 100], "max_depth": [3], "min_samples_leaf": [10, 30]},
    "RandomForestClassifier": {"max_depth": [3, 5], "min_samples_leaf": [10, 50]},
    "GradientBoostingClassifier": {"n_estimators": [50, 100], "max_depth": [3], "min_samples_leaf": [10, 30]},
}


def default_regressors(seed: int = 0) -> tuple[LearnerSpec, ...]:
    return tuple(LearnerSpec(f, DEFAULT_GRIDS[f], seed) for f in ("RandomForestRegressor", "GradientBoostingRegressor"))


def default_classifiers(seed: int = 0) -> tuple[LearnerSpec, ...]:
    return tuple(LearnerSpec(f, DEFAULT_GRIDS[f], seed) for f in ("RandomForestClassifier", "GradientBoostingClassifier"))


def _make(family: str, params: dict, seed: int):
    if family == "LinearRegression":
        return LinearRegression()
    if family.startswith("RandomForest"):
        cls = RandomForestRegressor if family == "RandomForestRegressor" else RandomForestClassifier
        return cls(n_estimators=params.get("n_estimators", FOREST_TREES), random_state=seed, n_jobs=n_threads(),
                   **{k: v for k, v in params.items() if k != "n_estimators"})
    cls = GradientBoostingRegressor if family == "GradientBoostingRegressor" else GradientBoostingClassifier
    return cls(learning_rate=LEARNING_RATE, random_state=seed, **params)


@dataclass(frozen=True)
class FittedModel:
    family: str
    chosen_params: dict
    estimator: object = field(repr=False)
    is_classifier: bool = False
    n_features: int = 0
    constant: float | None = None
    seed: int = 0
    cv_loss: float | None = None


def _raw_predict(model: FittedModel, X: np.ndarray) -> np.ndarray:
    if model.constant is not None:
        out = np.full(X.shape[0], model.constant)
    elif model.is_classifier:
        out = model.estimator.predict_proba(X)[:, 1]
    else:
        out = model.estimator.predict(X)
    return np.asarray(out, dtype=float)


def predict(model: FittedModel, features) -> np.ndarray:
    """Regressors: ensemble mean. Classifiers: clipped probability of class 1."""
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, model.n_features) if X.size else X.reshape(0, model.n_features)
    if X.shape[1] != model.n_features:
        raise LearnerError(f"expected {model.n_features} features, got {X.shape[1]}")
    if X.shape[0] == 0:
        return np.zeros(0)
    out = _raw_predict(model, X)
    if model.is_classifier:
        out = np.clip(out, PROB_CLIP, 1 - PROB_CLIP)
    return out


def _check_xy(spec_is_clf: bool, X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise LearnerError("features must be a 2-D array with one row per target")
    if spec_is_clf and not np.isin(y, (0.0, 1.0)).all():
        raise LearnerError("classifier targets must be 0/1")
    return X, y


def fit_fixed(family: str, params: dict, seed: int, X, y) -> FittedModel:
    """Fit one family with fixed hyperparameters (no search)."""
    is_clf = family in CLASSIFIERS
    X, y = _check_xy(is_clf, X, y)
    if np.unique(y).size < 2:
        value = float(y[0]) if y.size else 0.0
        log.warning("constant target for %s; fitting a constant predictor", family)
        return FittedModel(family, dict(params), None, is_clf, X.shape[1], value, seed)
    est = _make(family, params, seed)
    est.fit(X, y)
    if "n_jobs" in est.get_params():
        # threaded forest prediction sums trees in completion order
        est.set_params(n_jobs=1)
    return FittedModel(family, dict(params), est, is_clf, X.shape[1], None, seed)


def fold_indices(n: int, k: int, seed: int, strata=None) -> np.ndarray:
    """Fold id per row from a seeded shuffle; stratified when ``strata`` is given."""
    if k < 2:
        raise LearnerError("need at least 2 folds")
    if n < k:
        raise LearnerError(f"cannot form {k} folds from {n} rows")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=int)
    if strata is None:
        folds[rng.permutation(n)] = np.arange(n) % k
        return folds
    strata = np.asarray(strata)
    offset = 0
    for level in np.unique(strata):
        idx = np.flatnonzero(strata == level)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    return folds


def _loss(is_clf: bool, y: np.ndarray, pred: np.ndarray) -> float:
    if is_clf:
        p = np.clip(pred, PROB_CLIP, 1 - PROB_CLIP)
        return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
    return float(np.mean((y - pred) ** 2))


def _fold_predictions(family: str, cands: list[dict], seed: int, X, y, train, test) -> list[np.ndarray]:
    """Held-out predictions for every candidate on one split.

    Boosting candidates that differ only in ``n_estimators`` share one fit
    and are read off the staged predictions.
    """
    is_clf = family in CLASSIFIERS
    out: list[np.ndarray | None] = [None] * len(cands)
    if family.startswith("GradientBoosting") and np.unique(y[train]).size > 1:
        groups: dict[tuple, list[int]] = {}
        for i, c in enumerate(cands):
            key = tuple(sorted((k, v) for k, v in c.items() if k != "n_estimators"))
            groups.setdefault(key, []).append(i)
        for key, members in groups.items():
            stages = {cands[i].get("n_estimators", 100): i for i in members}
            params = dict(key)
            params["n_estimators"] = max(stages)
            est = _make(family, params, seed).fit(X[train], y[train])
            staged = est.staged_predict_proba(X[test]) if is_clf else est.staged_predict(X[test])
            for m, pred in enumerate(staged, start=1):
                for i in members:
                    if cands[i].get("n_estimators", 100) == m:
                        out[i] = pred[:, 1] if is_clf else pred
        return out
    for i, c in enumerate(cands):
        model = fit_fixed(family, c, seed, X[train], y[train])
        out[i] = _raw_predict(model, X[test])
    return out


def select_learner(specs: Sequence[LearnerSpec], features, target, cv: int = 3) -> FittedModel:
    """Grid search over every candidate of every spec, then refit the winner.

    Candidates are scored by ``cv``-fold held-out loss (squared error for
    regressors, log-loss for classifiers); ties keep the earliest candidate.
    """
    if not specs:
        raise LearnerError("no learner specs given")
    kinds = {s.is_classifier for s in specs}
    if len(kinds) > 1:
        raise LearnerError("cannot mix classifiers and regressors in one search")
    is_clf = kinds.pop()
    X, y = _check_xy(is_clf, features, target)
    if X.shape[0] < 10:
        raise LearnerError("need at least 10 rows to fit a learner")
    seed = specs[0].seed
    if np.unique(y).size < 2:
        log.warning("constant target; fitting a constant predictor")
        return FittedModel(specs[0].family, {}, None, is_clf, X.shape[1], float(y[0]), seed)
    pairs = [(s, c) for s in specs for c in s.candidates()]
    if len(pairs) == 1:
        s, c = pairs[0]
        return fit_fixed(s.family, c, s.seed, X, y)
    strata = y if is_clf and np.bincount(y.astype(int)).min() >= cv else None
    folds = fold_indices(X.shape[0], cv, seed, strata)
    losses = np.zeros(len(pairs))
    for f in range(cv):
        train, test = np.flatnonzero(folds != f), np.flatnonzero(folds == f)
        start = 0
        for s in specs:
            cands = s.candidates()
            preds = _fold_predictions(s.family, cands, s.seed, X, y, train, test)
            for j, pred in enumerate(preds):
                losses[start + j] += _loss(is_clf, y[test], pred) * test.size
            start += len(cands)
    best = int(np.argmin(losses))
    s, c = pairs[best]
    model = fit_fixed(s.family, c, s.seed, X, y)
    return FittedModel(model.family, model.chosen_params, model.estimator, model.is_classifier,
                       model.n_features, model.constant, model.seed, float(losses[best] / X.shape[0]))


def fit_learner(spec: LearnerSpec, features, target) -> FittedModel:
    return select_learner([spec], features, target)


@dataclass(frozen=True)
class CrossFitResult:
    predictions: np.ndarray
    fold_assignment: np.ndarray
    k: int
    models: tuple[FittedModel, ...] = field(default=(), repr=False)


def cross_fit(
    learner: LearnerSpec | Sequence[LearnerSpec] | FittedModel,
    features,
    target,
    k: int = 5,
    seed: int = 0,
    folds: np.ndarray | None = None,
) -> CrossFitResult:
    """Out-of-fold predictions.

    ``learner`` may be a spec (or list of specs) searched afresh on every
    training complement, or an already-selected :class:`FittedModel` whose
    hyperparameters are refit per fold.
    """
    fixed = isinstance(learner, FittedModel)
    specs = None if fixed else ([learner] if isinstance(learner, LearnerSpec) else list(learner))
    is_clf = learner.is_classifier if fixed else specs[0].is_classifier
    X, y = _check_xy(is_clf, features, target)
    n = X.shape[0]
    if folds is None:
        if k < 2 or n < 2 * k and k != n:
            raise LearnerError(f"cross-fitting needs k >= 2 and n >= 2k (n={n}, k={k})")
        folds = fold_indices(n, k, seed, y if is_clf else None)
    else:
        folds = np.asarray(folds, dtype=int)
        k = int(folds.max()) + 1
    preds = np.empty(n)
    models = []
    for f in range(k):
        train, test = np.flatnonzero(folds != f), np.flatnonzero(folds == f)
        if test.size == 0:
            raise LearnerError(f"fold {f} is empty")
        if is_clf and np.unique(y[train]).size < 2:
            raise LearnerError(f"training complement of fold {f} is missing a class")
        if fixed:
            if learner.constant is not None and np.unique(y[train]).size < 2:
                model = learner
            else:
                model = fit_fixed(learner.family, learner.chosen_params, learner.seed, X[train], y[train])
        else:
            model = select_learner(specs, X[train], y[train])
        preds[test] = predict(model, X[test])
        models.append(model)
    return CrossFitResult(preds, folds, k, tuple(models))
