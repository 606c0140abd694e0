"""Refutation checks: placebo, random common cause and data subsets.

Each check re-runs an estimator on perturbed data and reports how far the
re-computed effect moves from the original one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .effects import EstimationError, EstimatorConfig, estimate_all
from .events import DesignMatrix, EventError

log = logging.getLogger(__name__)

STRATEGIES = ("PlaceboTreatmentOutcome", "RandomCommonCause", "DataSubset")
SHORT_NAMES = {"placebo": STRATEGIES[0], "common_cause": STRATEGIES[1], "subset": STRATEGIES[2]}
MAX_REDRAWS = 5


class RefutationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RefutationReport:
    strategy: str
    estimator: str
    original_effect: float
    recomputed_effect: float
    delta_abs: float
    reps: int
    seed: int
    effects: tuple[float, ...] = ()
    skipped: int = 0
    warnings: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "estimator": self.estimator,
            "original_effect": self.original_effect,
            "recomputed_effect": self.recomputed_effect,
            "delta_abs": self.delta_abs,
            "reps": self.reps,
            "seed": self.seed,
            "effects": list(self.effects),
            "skipped": self.skipped,
            "warnings": list(self.warnings),
        }


def _names(est) -> tuple[str, ...]:
    return (est,) if isinstance(est, str) else tuple(est)


def _originals(dm, names, cfg, original) -> dict[str, float]:
    if original is None:
        res = estimate_all(dm, replace(cfg, estimators=names))
        return {k: res[k].effect for k in names}
    if isinstance(original, Mapping):
        return {k: float(original[k]) for k in names}
    return {k: float(original) for k in names}


def _report(strategy, est, original, effects, reps, seed, skipped, warnings) -> RefutationReport:
    if not effects:
        raise RefutationError(f"{strategy}: every repetition failed")
    recomputed = math.fsum(effects) / len(effects)
    return RefutationReport(strategy, est, original, recomputed, abs(original - recomputed),
                            reps, seed, tuple(effects), skipped, tuple(warnings))


def _run(strategy, dm, est, cfg, original, reps, seed, draws):
    """Estimate on each perturbed design from ``draws`` and build one report per estimator.

    ``draws`` yields ``(rep, design or None, reason)``; every estimator in a
    repetition shares the same perturbed data and nuisance fits.
    """
    names = _names(est)
    orig = _originals(dm, names, cfg, original)
    effects = {k: [] for k in names}
    warnings: list[str] = []
    skipped = 0
    sub_cfg = replace(cfg, estimators=names)
    for rep, design, reason in draws:
        if design is None:
            skipped += 1
            warnings.append(f"rep {rep} skipped: {reason}")
            continue
        try:
            res = estimate_all(design, sub_cfg)
        except (EstimationError, EventError, ValueError) as exc:
            skipped += 1
            warnings.append(f"rep {rep} skipped: {exc}")
            log.warning("%s rep %d skipped: %s", strategy, rep, exc)
            continue
        for k in names:
            effects[k].append(res[k].effect)
    reports = [_report(strategy, k, orig[k], effects[k], reps, seed, skipped, warnings) for k in names]
    return reports[0] if isinstance(est, str) else reports


def refute_placebo(dm: DesignMatrix, est: str | Sequence[str], cfg: EstimatorConfig = EstimatorConfig(),
                   reps: int = 10, seed: int = 0, original=None):
    """Permute treatment and outcome independently; the effect should vanish.

    ``est`` may name one estimator (one report) or several (a list of
    reports sharing the perturbed data). ``original`` is the unperturbed
    effect, a mapping of them, or None to re-estimate.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")

    def draws():
        for rep in range(reps):
            rng = np.random.default_rng([seed, rep])
            t = dm.t[rng.permutation(dm.n)]
            y = dm.y[rng.permutation(dm.n)]
            try:
                design, reason = dm.replace(t=t, y=y), ""
            except EventError as exc:
                design, reason = None, str(exc)
            yield rep, design, reason

    return _run(STRATEGIES[0], dm, est, cfg, original, reps, seed, draws())


def refute_random_common_cause(dm: DesignMatrix, est: str | Sequence[str], cfg: EstimatorConfig = EstimatorConfig(),
                               strength: float = 0.02, seed: int = 0, original=None):
    """Add a standard-normal common cause with linear weight ``strength`` to t and y.

    The perturbed treatment and outcome are kept numeric, not re-binarized.
    """
    if strength < 0:
        raise ValueError("strength must be non-negative")
    if strength == 0:
        perturbed = dm
    else:
        u = np.random.default_rng(seed).standard_normal(dm.n)
        perturbed = dm.replace(t=dm.t + strength * u, y=dm.y + strength * u)
    return _run(STRATEGIES[1], dm, est, cfg, original, 1, seed, [(0, perturbed, "")])


def refute_subset(dm: DesignMatrix, est: str | Sequence[str], cfg: EstimatorConfig = EstimatorConfig(),
                  fraction: float = 0.9, reps: int = 10, seed: int = 0, original=None):
    """Re-estimate on random subsets of ``floor(fraction * n)`` rows."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    size = math.floor(fraction * dm.n)

    def draws():
        for rep in range(reps):
            rng = np.random.default_rng([seed, rep])
            sub = None
            for _ in range(MAX_REDRAWS):
                idx = np.sort(rng.choice(dm.n, size, replace=False))
                try:
                    sub = dm.take(idx)
                    break
                except EventError:
                    continue
            yield rep, sub, "subsample lost treatment or outcome variation"

    return _run(STRATEGIES[2], dm, est, cfg, original, reps, seed, draws())
