"""Run configuration (JSON) for the full pipeline."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .effects import ESTIMATORS, EstimatorConfig
from .forest import ForestConfig
from .learners import LearnerError, LearnerSpec
from .refute import SHORT_NAMES


class ConfigError(ValueError):
    pass


def derive_seed(seed: int, stage: str) -> int:
    """Stage-specific seed derived from the run seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass(frozen=True)
class RefuteConfig:
    strategies: tuple[str, ...] = ("placebo", "common_cause", "subset")
    strength: float = 0.02
    fraction: float = 0.9
    reps: int = 10
    estimators: tuple[str, ...] | None = None  # default: every estimated one

    def __post_init__(self):
        bad = [s for s in self.strategies if s not in SHORT_NAMES]
        if bad:
            raise ConfigError(f"unknown refutation strategies {bad}")
        if self.strength < 0 or not 0 < self.fraction <= 1 or self.reps < 1:
            raise ConfigError("refute needs strength >= 0, fraction in (0, 1] and reps >= 1")


@dataclass(frozen=True)
class InterpretConfig:
    max_depth: int = 2
    estimator: str = "LDML"

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown interpret estimator {self.estimator!r}")
        if not 1 <= self.max_depth <= 4:
            raise ConfigError("interpret.max_depth must lie in [1, 4]")


@dataclass(frozen=True)
class RunConfig:
    data: str
    seed: int
    graph: str = "default"
    treatment: str = "D"
    outcome: str = "H"
    x_features: tuple[str, ...] = ("object_volume",)
    zero_variance: tuple[str, ...] | str = "auto"
    estimate: EstimatorConfig = field(default_factory=EstimatorConfig)
    refute: RefuteConfig = field(default_factory=RefuteConfig)
    interpret: InterpretConfig = field(default_factory=InterpretConfig)
    stages: tuple[str, ...] = ("identify", "estimate", "refute", "interpret")
    output_dir: str = "graspcause-out"
    base_dir: Path = field(default=Path("."), compare=False)
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def data_path(self) -> Path:
        return self.resolve(self.data)

    @property
    def graph_source(self) -> str | Path:
        return self.graph if self.graph == "default" else self.resolve(self.graph)

    def echo(self) -> dict:
        """Config as recorded in reports (output location excluded)."""
        return {
            "data": self.data,
            "seed": self.seed,
            "graph": self.graph,
            "treatment": self.treatment,
            "outcome": self.outcome,
            "x_features": list(self.x_features),
            "zero_variance": self.zero_variance if isinstance(self.zero_variance, str) else list(self.zero_variance),
            "estimate": self.estimate.to_dict(),
            "refute": {
                "strategies": list(self.refute.strategies),
                "strength": self.refute.strength,
                "fraction": self.refute.fraction,
                "reps": self.refute.reps,
                "estimators": None if self.refute.estimators is None else list(self.refute.estimators),
            },
            "interpret": {"max_depth": self.interpret.max_depth, "estimator": self.interpret.estimator},
            "stages": list(self.stages),
        }


def _specs(items, what) -> tuple[LearnerSpec, ...]:
    try:
        return tuple(LearnerSpec(d["family"], d.get("grid", {}), int(d.get("seed", 0))) for d in items)
    except (KeyError, TypeError, LearnerError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from None


def estimator_config(section: dict, seed: int) -> EstimatorConfig:
    section = dict(section or {})
    kwargs: dict = {"seed": int(section.pop("seed", derive_seed(seed, "estimate")))}
    for key in ("estimators", "k", "alpha", "clip"):
        if key in section:
            kwargs[key] = section.pop(key)
    if "model_y" in section:
        kwargs["model_y"] = _specs(section.pop("model_y"), "model_y")
    if "model_t" in section:
        kwargs["model_t"] = _specs(section.pop("model_t"), "model_t")
    if "forest" in section:
        try:
            kwargs["forest"] = ForestConfig(**section.pop("forest"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid forest section: {exc}") from None
    if section:
        raise ConfigError(f"unknown estimate keys {sorted(section)}")
    try:
        return EstimatorConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid estimate section: {exc}") from None


def from_dict(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    d = dict(raw)
    if "seed" not in d or isinstance(d["seed"], bool) or not isinstance(d["seed"], int):
        raise ConfigError("config needs an integer 'seed'")
    if not isinstance(d.get("data"), str) or not d["data"]:
        raise ConfigError("config needs a 'data' path")
    seed = d.pop("seed")
    kwargs: dict = {"data": d.pop("data"), "seed": seed, "base_dir": base_dir, "raw": raw}
    for key in ("graph", "treatment", "outcome", "output_dir"):
        if key in d:
            kwargs[key] = str(d.pop(key))
    if "x_features" in d:
        kwargs["x_features"] = tuple(d.pop("x_features"))
    if "zero_variance" in d:
        zv = d.pop("zero_variance")
        kwargs["zero_variance"] = zv if zv == "auto" else tuple(zv)
    if "stages" in d:
        kwargs["stages"] = tuple(d.pop("stages"))
        bad = set(kwargs["stages"]) - {"identify", "estimate", "refute", "interpret"}
        if bad:
            raise ConfigError(f"unknown stages {sorted(bad)}")
    kwargs["estimate"] = estimator_config(d.pop("estimate", {}), seed)
    try:
        ref = dict(d.pop("refute", {}))
        if "strategies" in ref:
            ref["strategies"] = tuple(ref["strategies"])
        if ref.get("estimators") is not None:
            ref["estimators"] = tuple(ref["estimators"])
        kwargs["refute"] = RefuteConfig(**ref)
        kwargs["interpret"] = InterpretConfig(**d.pop("interpret", {}))
    except TypeError as exc:
        raise ConfigError(f"invalid config section: {exc}") from None
    if d:
        raise ConfigError(f"unknown config keys {sorted(d)}")
    return RunConfig(**kwargs)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(raw, path.parent)


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    if "seed" in changes and "seed" not in (cfg.raw.get("estimate") or {}):
        changes["estimate"] = replace(cfg.estimate, seed=derive_seed(changes["seed"], "estimate"))
    return replace(cfg, **changes)
