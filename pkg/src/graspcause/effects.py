"""CATE estimators: linear and forest variants of double ML and the doubly robust learner.

All four share cross-fitted nuisances:

* DML partials out ``E[Y|X,W]`` and ``E[T|X,W]`` and regresses residual on
  residual (linearly in ``x`` for LDML, with an honest causal forest for FDML).
* DRL builds doubly robust pseudo-outcomes from ``E[Y|T,X,W]`` and the
  propensity and regresses them on ``x`` (OLS for LDRL, honest forest for FDRL).

The reported effect is the sample mean of the per-row CATE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .events import DesignMatrix
from .forest import ForestConfig, HonestForest
from .learners import (
    CLASSIFIERS,
    LearnerSpec,
    cross_fit,
    default_classifiers,
    default_regressors,
    fold_indices,
    predict,
    select_learner,
)

log = logging.getLogger(__name__)

ESTIMATORS = ("LDML", "LDRL", "FDML", "FDRL")
_NEEDS = {"LDML": ("y", "t"), "FDML": ("y", "t"), "LDRL": ("mu", "t"), "FDRL": ("mu", "t")}


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    estimators: tuple[str, ...] = ESTIMATORS
    k: int = 5
    alpha: float = 0.1
    seed: int = 0
    clip: tuple[float, float] = (0.05, 0.95)
    model_y: tuple[LearnerSpec, ...] = field(default_factory=default_regressors)
    model_t: tuple[LearnerSpec, ...] = field(default_factory=default_classifiers)
    forest: ForestConfig = ForestConfig()

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "clip", tuple(float(c) for c in self.clip))
        object.__setattr__(self, "model_y", tuple(self.model_y))
        object.__setattr__(self, "model_t", tuple(self.model_t))
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ValueError(f"unknown estimators {bad}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        lo, hi = self.clip
        if not 0 <= lo < hi <= 1:
            raise ValueError("clip must satisfy 0 <= low < high <= 1")
        if not self.model_y or any(s.is_classifier for s in self.model_y):
            raise ValueError("model_y must be a non-empty list of regressors")
        if not self.model_t:
            raise ValueError("model_t must be non-empty")

    @classmethod
    def linear(cls, **kwargs) -> "EstimatorConfig":
        """Ordinary least squares for every nuisance."""
        lin = (LearnerSpec("LinearRegression"),)
        return cls(model_y=lin, model_t=lin, **kwargs)

    def to_dict(self) -> dict:
        return {
            "estimators": list(self.estimators),
            "k": self.k,
            "alpha": self.alpha,
            "seed": self.seed,
            "clip": list(self.clip),
            "model_y": [s.to_dict() for s in self.model_y],
            "model_t": [s.to_dict() for s in self.model_t],
            "forest": {
                "n_trees": self.forest.n_trees,
                "subsample": self.forest.subsample,
                "honesty": self.forest.honesty,
                "bag_size": self.forest.bag_size,
                "min_leaf": self.forest.min_leaf,
                "max_depth": self.forest.max_depth,
            },
        }


@dataclass(frozen=True)
class EffectEstimate:
    estimator: str
    cate: np.ndarray = field(repr=False)
    effect: float
    ci_low: float
    ci_high: float
    alpha: float
    n: int
    diagnostics: dict = field(default_factory=dict, repr=False)
    warnings: tuple[str, ...] = ()

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low


def cate_mean(estimate: EffectEstimate | Sequence[float]) -> float:
    """Mean CATE, exactly rounded so that it does not depend on row order."""
    cate = estimate.cate if isinstance(estimate, EffectEstimate) else estimate
    cate = np.asarray(cate, dtype=float)
    if cate.size == 0:
        raise ValueError("empty CATE vector")
    return math.fsum(cate.tolist()) / cate.size


def canonical_order(dm: DesignMatrix) -> np.ndarray:
    """Row order determined by content only, so estimates ignore input order."""
    keys = [dm.w[:, j] for j in range(dm.w.shape[1] - 1, -1, -1)]
    keys += [dm.x[:, j] for j in range(dm.x.shape[1] - 1, -1, -1)]
    keys += [dm.y, dm.t]
    return np.lexsort(keys)


def _as_regressor(spec: LearnerSpec) -> LearnerSpec:
    if spec.family in CLASSIFIERS:
        return LearnerSpec(spec.family.replace("Classifier", "Regressor"), spec.grid, spec.seed)
    return spec


@dataclass(frozen=True)
class Nuisances:
    folds: np.ndarray
    y_hat: np.ndarray | None = None
    t_hat: np.ndarray | None = None
    mu0: np.ndarray | None = None
    mu1: np.ndarray | None = None
    chosen: dict = field(default_factory=dict)


def fit_nuisances(dm: DesignMatrix, cfg: EstimatorConfig, roles: Sequence[str]) -> Nuisances:
    """Select hyperparameters once on all rows, then cross-fit with them."""
    strata = (dm.t > 0.5).astype(int)
    folds = fold_indices(dm.n, cfg.k, cfg.seed, strata)
    feats = dm.features
    out: dict = {"folds": folds, "chosen": {}}
    seeded_y = tuple(s.with_seed(cfg.seed) for s in cfg.model_y)
    if "y" in roles:
        model = select_learner(seeded_y, feats, dm.y)
        out["y_hat"] = cross_fit(model, feats, dm.y, folds=folds).predictions
        out["chosen"]["y"] = {"family": model.family, "params": model.chosen_params}
    if "t" in roles:
        specs = tuple(s.with_seed(cfg.seed) for s in cfg.model_t)
        if not dm.binary_treatment:
            specs = tuple(_as_regressor(s) for s in specs)
        model = select_learner(specs, feats, dm.t)
        t_hat = cross_fit(model, feats, dm.t, folds=folds).predictions
        out["t_hat"] = t_hat
        out["chosen"]["t"] = {"family": model.family, "params": model.chosen_params}
    if "mu" in roles:
        tf = np.column_stack([dm.t, feats])
        model = select_learner(seeded_y, tf, dm.y)
        res = cross_fit(model, tf, dm.y, folds=folds)
        mu0, mu1 = np.empty(dm.n), np.empty(dm.n)
        for f, m in enumerate(res.models):
            rows = np.flatnonzero(folds == f)
            mu0[rows] = predict(m, np.column_stack([np.zeros(rows.size), feats[rows]]))
            mu1[rows] = predict(m, np.column_stack([np.ones(rows.size), feats[rows]]))
        out["mu0"], out["mu1"] = mu0, mu1
        out["chosen"]["mu"] = {"family": model.family, "params": model.chosen_params}
    return Nuisances(**out)


def _ols_hc1(A: np.ndarray, target: np.ndarray):
    """Least-squares coefficients and HC1 covariance."""
    n, p = A.shape
    coef, _, rank, _ = np.linalg.lstsq(A, target, rcond=None)
    if rank < p or n <= p:
        raise EstimationError("singular final-stage design")
    resid = target - A @ coef
    bread = np.linalg.inv(A.T @ A)
    meat = (A * resid[:, None] ** 2).T @ A
    cov = bread @ meat @ bread * (n / (n - p))
    return coef, cov


def _interval(effect: float, se: float, alpha: float) -> tuple[float, float]:
    z = stats.norm.ppf(1 - alpha / 2)
    return effect - z * se, effect + z * se


def _linear_final(dm, design, target, alpha):
    coef, cov = _ols_hc1(design, target)
    basis = np.column_stack([np.ones(dm.n), dm.x])
    cate = basis @ coef
    effect = cate_mean(cate)
    c = np.concatenate([[1.0], dm.x.mean(axis=0)])
    se = float(math.sqrt(max(c @ cov @ c, 0.0)))
    lo, hi = _interval(effect, se, alpha)
    return cate, effect, lo, hi, {"coef": coef.tolist(), "se": se}


def _forest_final(dm, num, den, cfg):
    forest = HonestForest(cfg.forest, cfg.seed).fit(dm.x, num, den)
    cate, per_tree, fallback = forest.predict_with_variance(dm.x)
    effect = cate_mean(cate)
    se = math.sqrt(forest.mean_effect_variance(per_tree))
    lo, hi = _interval(effect, se, cfg.alpha)
    warnings = []
    if fallback.any():
        warnings.append(f"forest denominator vanished at {int(fallback.sum())} points; used global ratio")
    return cate, effect, lo, hi, {"se": se}, warnings


def _dml(name, dm, nu, cfg):
    res_y = dm.y - nu.y_hat
    res_t = dm.t - nu.t_hat
    if np.max(np.abs(res_t)) < 1e-10:
        raise EstimationError("no treatment variation left after partialling out controls")
    diag = {
        "propensity_range": [float(nu.t_hat.min()), float(nu.t_hat.max())],
        "residual_var_y": float(res_y.var()),
        "residual_var_t": float(res_t.var()),
    }
    warnings: list[str] = []
    if name == "LDML":
        design = res_t[:, None] * np.column_stack([np.ones(dm.n), dm.x])
        cate, effect, lo, hi, extra = _linear_final(dm, design, res_y, cfg.alpha)
    else:
        cate, effect, lo, hi, extra, warnings = _forest_final(dm, res_y * res_t, res_t**2, cfg)
    diag.update(extra)
    return cate, effect, lo, hi, diag, warnings


def _drl(name, dm, nu, cfg):
    lo_clip, hi_clip = cfg.clip
    p = np.clip(nu.t_hat, lo_clip, hi_clip)
    clipped = float(np.mean((nu.t_hat < lo_clip) | (nu.t_hat > hi_clip)))
    warnings = []
    if clipped > 0.5:
        warnings.append(f"small-overlap: {clipped:.0%} of propensities clipped")
    t, y = dm.t, dm.y
    psi = nu.mu1 - nu.mu0 + t * (y - nu.mu1) / p - (1 - t) * (y - nu.mu0) / (1 - p)
    diag = {
        "propensity_range": [float(nu.t_hat.min()), float(nu.t_hat.max())],
        "clipped_fraction": clipped,
        "pseudo_outcome_var": float(psi.var()),
    }
    if name == "LDRL":
        design = np.column_stack([np.ones(dm.n), dm.x])
        cate, effect, lo, hi, extra = _linear_final(dm, design, psi, cfg.alpha)
    else:
        cate, effect, lo, hi, extra, more = _forest_final(dm, psi, np.ones(dm.n), cfg)
        warnings += more
    diag.update(extra)
    return cate, effect, lo, hi, diag, warnings


def estimate_all(dm: DesignMatrix, cfg: EstimatorConfig = EstimatorConfig()) -> dict[str, EffectEstimate]:
    """Run every estimator in ``cfg.estimators`` on shared cross-fitted nuisances."""
    if not dm.binary_treatment and not np.all(np.isfinite(dm.t)):
        raise EstimationError("treatment must be finite")
    order = canonical_order(dm)
    dmc = dm.take(order)
    roles = sorted({r for e in cfg.estimators for r in _NEEDS[e]})
    nu = fit_nuisances(dmc, cfg, roles)
    results = {}
    for name in cfg.estimators:
        run = _dml if name.endswith("DML") else _drl
        cate_c, effect, lo, hi, diag, warnings = run(name, dmc, nu, cfg)
        cate = np.empty(dm.n)
        cate[order] = cate_c
        cate.setflags(write=False)
        diag["nuisance"] = nu.chosen
        for w in warnings:
            log.warning("%s: %s", name, w)
        results[name] = EffectEstimate(
            estimator=name,
            cate=cate,
            effect=effect,
            ci_low=min(lo, effect),
            ci_high=max(hi, effect),
            alpha=cfg.alpha,
            n=dm.n,
            diagnostics=diag,
            warnings=tuple(warnings),
        )
    return results


def estimate(dm: DesignMatrix, estimator: str, cfg: EstimatorConfig = EstimatorConfig()) -> EffectEstimate:
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    return estimate_all(dm, replace(cfg, estimators=(estimator,)))[estimator]


def estimate_ldml(dm: DesignMatrix, cfg: EstimatorConfig = EstimatorConfig()) -> EffectEstimate:
    return estimate(dm, "LDML", cfg)


def estimate_fdml(dm: DesignMatrix, cfg: EstimatorConfig = EstimatorConfig()) -> EffectEstimate:
    return estimate(dm, "FDML", cfg)


def estimate_ldrl(dm: DesignMatrix, cfg: EstimatorConfig = EstimatorConfig()) -> EffectEstimate:
    return estimate(dm, "LDRL", cfg)


def estimate_fdrl(dm: DesignMatrix, cfg: EstimatorConfig = EstimatorConfig()) -> EffectEstimate:
    return estimate(dm, "FDRL", cfg)
