"""Structural causal model generating grasp-event logs with known effects.

Each event draws an object and a surface from categorical marginals. A latent
reach score (covariate-driven when confounded, pure noise when randomized)
plus logistic noise is mapped to a head-hand distance; the median split of
those distances is the treatment, exactly as :func:`events.encode` recomputes
it. Hand choice is Bernoulli with a logistic or linear-probability link.

Covariates addressable by coefficient dictionaries:

``intercept``, ``volume_l`` (object volume in litres), ``surface_in_container``,
``surface_sliding``, ``object:<category>`` and ``surface:<surface>`` indicators.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .events import EventTable, GraspEvent, format_events, median_split


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Constant:
    tau: float

    def __call__(self, volume: np.ndarray) -> np.ndarray:
        return np.full(np.shape(volume), float(self.tau))


@dataclass(frozen=True)
class Step:
    """Effect ``low`` where ``feature <= threshold`` and ``high`` above it."""

    threshold: float
    low: float
    high: float
    feature: str = "object_volume"

    def __call__(self, volume: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(volume) <= self.threshold, float(self.low), float(self.high))


# (count in source table, volume in m^3)
_VOLUMES = {
    "Silverware": 8.2e-5,
    "Glass": 1.22e-3,
    "Milk": 1.40e-3,
    "Juice": 1.93e-3,
    "Bowl": 2.40e-3,
    "Cereal": 6.30e-3,
    "Tray": 9.95e-3,
}
# surface -> (in container, sliding)
_SURFACE_FLAGS = {
    "DiningTable": (False, False),
    "FrdgArea": (True, False),
    "FrdgDrBtmShlf": (True, False),
    "FrdgGlassShlf": (True, True),
    "IslndArea": (False, False),
    "IslndDrwBtmLft": (True, True),
    "LabFloor": (False, False),
    "OvenArea": (False, False),
    "OvenDrwRight": (True, True),
    "SinkArea": (False, False),
    "SnkDrwLftBtm": (True, True),
    "SnkDrwLftMid": (True, True),
    "SnkDrwLftTop": (True, True),
    "Tray": (False, False),
}
_COUNTS = {
    "ds1": {
        "objects": {"Silverware": 83, "Glass": 83, "Milk": 18, "Juice": 88, "Bowl": 19, "Cereal": 93},
        "surfaces": {"DiningTable": 12, "FrdgDrBtmShlf": 5, "FrdgGlassShlf": 41, "LabFloor": 5,
                     "OvenDrwRight": 41, "SinkArea": 11, "SnkDrwLftMid": 41, "SnkDrwLftTop": 41, "Tray": 184},
        "hands": (121, 263),
        "distance": (0.59, 0.92),
        "n": 384,
    },
    "ds2": {
        "objects": {"Silverware": 70, "Milk": 8, "Bowl": 36, "Cereal": 28, "Tray": 32},
        "surfaces": {"DiningTable": 18, "FrdgArea": 1, "FrdgDrBtmShlf": 2, "IslndArea": 8, "IslndDrwBtmLft": 16,
                     "OvenArea": 2, "OvenDrwRight": 16, "SinkArea": 24, "SnkDrwLftTop": 42, "Tray": 42},
        "hands": (96, 78),
        "distance": (0.47, 0.77),
        "n": 174,
    },
    "dsv": {
        "objects": {"Silverware": 29, "Glass": 23, "Milk": 24, "Juice": 21, "Bowl": 16, "Cereal": 24},
        "surfaces": {"FrdgArea": 1, "FrdgDrBtmShlf": 22, "FrdgGlassShlf": 21, "IslndArea": 21, "LabFloor": 2,
                     "OvenDrwRight": 22, "SinkArea": 1, "SnkDrwLftBtm": 1, "SnkDrwLftMid": 20, "SnkDrwLftTop": 25},
        "hands": (64, 73),
        "distance": (0.56, 0.85),
        "n": 137,
    },
}
PRESETS = tuple(_COUNTS)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    objects: Mapping[str, tuple[float, float]]  # category -> (probability, volume m^3)
    surfaces: Mapping[str, tuple[float, bool, bool]]  # surface -> (probability, SC, SS)
    treatment: str = "randomized"  # or "confounded"
    confounding: Mapping[str, float] = field(default_factory=dict)
    effect: Constant | Step = Constant(0.0)
    outcome_base: Mapping[str, float] = field(default_factory=dict)
    link: str = "logistic"  # or "linear"
    volume_jitter: float = 0.0
    distance_range: tuple[float, float] = (0.5, 0.9)
    dominant_hand: str = "Right"
    noise_seed: int = 0
    dataset_id: str = "synthetic"

    def __post_init__(self):
        if self.n < 20:
            raise ScenarioError("n must be at least 20")
        for block, entries in (("objects", self.objects), ("surfaces", self.surfaces)):
            if not entries:
                raise ScenarioError(f"{block} marginals are empty")
            probs = np.array([v[0] for v in entries.values()], dtype=float)
            if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
                raise ScenarioError(f"{block} probabilities must be non-negative and sum to 1")
        if any(v[1] <= 0 for v in self.objects.values()):
            raise ScenarioError("object volumes must be positive")
        if self.treatment not in ("randomized", "confounded"):
            raise ScenarioError(f"unknown treatment mechanism {self.treatment!r}")
        if self.link not in ("logistic", "linear"):
            raise ScenarioError(f"unknown link {self.link!r}")
        if self.volume_jitter < 0:
            raise ScenarioError("volume_jitter must be non-negative")
        lo, hi = self.distance_range
        if not 0 < lo < hi:
            raise ScenarioError("distance_range must satisfy 0 < low < high")
        if self.dominant_hand not in ("Left", "Right"):
            raise ScenarioError("dominant_hand must be Left or Right")
        known = {"intercept", "volume_l", "surface_in_container", "surface_sliding"}
        known |= {f"object:{k}" for k in self.objects} | {f"surface:{k}" for k in self.surfaces}
        for name in list(self.confounding) + list(self.outcome_base):
            if name not in known:
                raise ScenarioError(f"unknown covariate {name!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["effect"] = {"kind": type(self.effect).__name__.lower(), **asdict(self.effect)}
        d["objects"] = {k: list(v) for k, v in self.objects.items()}
        d["surfaces"] = {k: list(v) for k, v in self.surfaces.items()}
        d["confounding"] = dict(self.confounding)
        d["outcome_base"] = dict(self.outcome_base)
        d["distance_range"] = list(self.distance_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        eff = dict(d.pop("effect", {"kind": "constant", "tau": 0.0}))
        kind = eff.pop("kind", "constant")
        d["effect"] = Constant(**eff) if kind == "constant" else Step(**eff)
        d["objects"] = {k: tuple(v) for k, v in d["objects"].items()}
        d["surfaces"] = {k: (float(v[0]), bool(v[1]), bool(v[2])) for k, v in d["surfaces"].items()}
        if "distance_range" in d:
            d["distance_range"] = tuple(d["distance_range"])
        return cls(**d)


def preset(name: str, n: int | None = None, **overrides) -> ScenarioConfig:
    """Scenario with marginals transcribed from one dataset column (ds1, ds2, dsv).

    The default outcome model matches the dataset's left/right hand shares
    with randomized treatment and no effect.
    """
    if name not in _COUNTS:
        raise ScenarioError(f"unknown preset {name!r}; choose from {PRESETS}")
    src = _COUNTS[name]
    obj_total = sum(src["objects"].values())
    surf_total = sum(src["surfaces"].values())
    left, right = src["hands"]
    p_right = right / (left + right)
    link = overrides.get("link", "logistic")
    intercept = math.log(p_right / (1 - p_right)) if link == "logistic" else p_right
    kwargs = dict(
        n=n if n is not None else src["n"],
        objects={k: (c / obj_total, _VOLUMES[k]) for k, c in src["objects"].items()},
        surfaces={k: (c / surf_total, *_SURFACE_FLAGS[k]) for k, c in src["surfaces"].items()},
        outcome_base={"intercept": intercept},
        distance_range=src["distance"],
        dataset_id=f"synthetic-{name}",
    )
    kwargs.update(overrides)
    return ScenarioConfig(**kwargs)


def known_effect(n: int = 400, tau: float = 0.15, seed: int = 0, **overrides) -> ScenarioConfig:
    """Confounded Ds-v scenario with a constant effect on a linear-probability link.

    Containers and larger objects push the hand farther away and also raise
    P(Right), so the unadjusted far-minus-close difference overstates ``tau``.
    """
    kwargs = dict(
        treatment="confounded",
        link="linear",
        effect=Constant(tau),
        outcome_base={"intercept": 0.45, "surface_in_container": 0.2, "surface_sliding": -0.1, "volume_l": 0.03},
        confounding={"surface_in_container": 2.0, "volume_l": 0.5},
        noise_seed=seed,
        dataset_id="synthetic-known-effect",
    )
    kwargs.update(overrides)
    return preset("dsv", n, **kwargs)


@dataclass(frozen=True)
class GroundTruth:
    cate_mean: float
    per_sample_cate: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"cate_mean": self.cate_mean, "per_sample_cate": self.per_sample_cate.tolist()}


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _draw_covariates(cfg: ScenarioConfig, n: int, rng: np.random.Generator) -> dict:
    obj_names = list(cfg.objects)
    surf_names = list(cfg.surfaces)
    obj = rng.choice(len(obj_names), size=n, p=[cfg.objects[k][0] for k in obj_names])
    surf = rng.choice(len(surf_names), size=n, p=[cfg.surfaces[k][0] for k in surf_names])
    volume = np.array([cfg.objects[obj_names[i]][1] for i in obj])
    if cfg.volume_jitter > 0:
        volume = volume * np.exp(cfg.volume_jitter * rng.standard_normal(n))
    return {
        "object": np.array(obj_names, dtype=object)[obj],
        "surface": np.array(surf_names, dtype=object)[surf],
        "volume": volume,
        "sc": np.array([cfg.surfaces[surf_names[i]][1] for i in surf], dtype=bool),
        "ss": np.array([cfg.surfaces[surf_names[i]][2] for i in surf], dtype=bool),
    }


def _linear_score(coefs: Mapping[str, float], cov: dict) -> np.ndarray:
    n = cov["volume"].size
    score = np.zeros(n)
    for name, c in coefs.items():
        if name == "intercept":
            score += c
        elif name == "volume_l":
            score += c * cov["volume"] * 1000.0
        elif name == "surface_in_container":
            score += c * cov["sc"]
        elif name == "surface_sliding":
            score += c * cov["ss"]
        elif name.startswith("object:"):
            score += c * (cov["object"] == name[7:])
        elif name.startswith("surface:"):
            score += c * (cov["surface"] == name[8:])
    return score


def _response(cfg: ScenarioConfig, base: np.ndarray, theta: np.ndarray, t_centered: np.ndarray) -> np.ndarray:
    if cfg.link == "logistic":
        return _sigmoid(base + theta * t_centered)
    return np.clip(base + theta * t_centered, 0.0, 1.0)


def _cate(cfg: ScenarioConfig, cov: dict) -> np.ndarray:
    base = _linear_score(cfg.outcome_base, cov)
    theta = cfg.effect(cov["volume"])
    return _response(cfg, base, theta, np.full(base.size, 0.5)) - _response(cfg, base, theta, np.full(base.size, -0.5))


def generate(cfg: ScenarioConfig) -> tuple[EventTable, GroundTruth]:
    rng = np.random.default_rng(cfg.noise_seed)
    cov = _draw_covariates(cfg, cfg.n, rng)
    reach = _linear_score(cfg.confounding, cov) if cfg.treatment == "confounded" else np.zeros(cfg.n)
    latent = reach + rng.logistic(size=cfg.n)
    lo, hi = cfg.distance_range
    distance = lo + (hi - lo) * _sigmoid(latent)
    t = median_split(distance).assign(distance)
    base = _linear_score(cfg.outcome_base, cov)
    theta = cfg.effect(cov["volume"])
    p = _response(cfg, base, theta, t - 0.5)
    right = rng.random(cfg.n) < p
    cate = _cate(cfg, cov)
    events = tuple(
        GraspEvent(
            object_category=str(cov["object"][i]),
            object_volume=float(cov["volume"][i]),
            surface_id=str(cov["surface"][i]),
            surface_in_container=bool(cov["sc"][i]),
            surface_sliding=bool(cov["ss"][i]),
            hand="Right" if right[i] else "Left",
            dominant_hand=cfg.dominant_hand,
            head_hand_distance=float(distance[i]),
        )
        for i in range(cfg.n)
    )
    cate.setflags(write=False)
    return EventTable(events, cfg.dataset_id), GroundTruth(float(cate.mean()), cate)


@dataclass(frozen=True)
class OracleEstimate:
    mean: float
    stderr: float

    def __float__(self) -> float:
        return self.mean


def oracle_cate_mean(cfg: ScenarioConfig, mc_n: int = 100_000, seed: int | None = None) -> OracleEstimate:
    """Monte-Carlo population CATE mean over fresh covariate draws."""
    if mc_n < 100_000:
        raise ScenarioError("mc_n must be at least 1e5")
    rng = np.random.default_rng([cfg.noise_seed, 1] if seed is None else seed)
    cate = _cate(cfg, _draw_covariates(cfg, mc_n, rng))
    return OracleEstimate(float(cate.mean()), float(cate.std(ddof=1) / math.sqrt(mc_n)))


def write_scenario(table: EventTable, truth: GroundTruth, cfg: ScenarioConfig, out_dir: str | Path,
                   stem: str = "events") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` plus a ``<stem>.truth.json`` sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(format_events(table), encoding="utf-8")
    side = out / f"{stem}.truth.json"
    side.write_text(
        json.dumps({"config": cfg.to_dict(), "ground_truth": truth.to_dict()}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return csv_path, side


def linear_gaussian(n: int, tau: float = 0.15, noise: float = 1.0, seed: int = 0, n_controls: int = 5):
    """Linear-Gaussian design: Gaussian controls, threshold treatment, linear outcome.

    Returns ``(y, t, x, w)`` with ``y = tau * t + w @ beta + 0.1 * x + noise * eps``.
    """
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((n, n_controls))
    x = rng.standard_normal((n, 1))
    gamma = np.linspace(0.8, -0.4, n_controls)
    beta = np.linspace(-0.5, 1.0, n_controls)
    t = (w @ gamma + 0.3 * x[:, 0] + rng.standard_normal(n) > 0).astype(float)
    y = tau * t + w @ beta + 0.1 * x[:, 0] + noise * rng.standard_normal(n)
    return y, t, x, w
