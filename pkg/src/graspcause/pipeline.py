"""identify -> estimate -> refute -> interpret, with a JSON/Markdown/DOT report."""

from __future__ import annotations

import json
import logging
import platform
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import sklearn

from . import __version__
from .config import RunConfig, derive_seed
from .effects import EffectEstimate, estimate_all
from .events import encode, read_events, summarize
from .explain import fit_cate_tree, render_dot
from .graph import Estimand, identify, load_graph
from .refute import SHORT_NAMES, refute_placebo, refute_random_common_cause, refute_subset
from .report import render_markdown

log = logging.getLogger(__name__)

TIMESTAMP_KEY = "generated_at"


def report_schema() -> dict:
    text = resources.files("graspcause").joinpath("schema/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def estimand_dict(est: Estimand, g) -> dict:
    return {
        "treatment": est.treatment,
        "outcome": est.outcome,
        "adjustment_set": est.ordered_adjustment(g),
        "identifiable": est.identifiable,
        "warnings": list(est.warnings),
        "expression": est.expression(g),
    }


def estimate_dict(e: EffectEstimate) -> dict:
    return {
        "estimator": e.estimator,
        "effect": e.effect,
        "ci_low": e.ci_low,
        "ci_high": e.ci_high,
        "alpha": e.alpha,
        "n": e.n,
        "warnings": list(e.warnings),
        "diagnostics": _plain(e.diagnostics),
    }


def _plain(obj):
    """JSON-safe copy (numpy scalars/arrays to Python)."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def versions() -> dict:
    return {
        "graspcause": __version__,
        "numpy": np.__version__,
        "scikit-learn": sklearn.__version__,
        "python": platform.python_version(),
    }


def execute(cfg: RunConfig) -> dict:
    """Run the configured stages and return the report document.

    A failing stage is recorded under ``errors`` and every stage depending on
    it is marked skipped; nothing is raised.
    """
    report: dict = {
        TIMESTAMP_KEY: datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "versions": versions(),
        "config": cfg.echo(),
        "stages": {},
        "errors": [],
    }
    stages = report["stages"]

    def fail(stage, exc):
        log.error("%s failed: %s", stage, exc)
        stages[stage] = {"status": "error", "reason": str(exc)}
        report["errors"].append({"stage": stage, "message": f"{type(exc).__name__}: {exc}"})

    def skip(stage, reason):
        stages[stage] = {"status": "skipped", "reason": reason}

    try:
        table = read_events(cfg.data_path)
        g = load_graph(cfg.graph_source)
        report["dataset"] = summarize(table)
        stages["load"] = {"status": "ok"}
    except Exception as exc:  # noqa: BLE001 - recorded in the report
        fail("load", exc)
        for s in ("identify", "estimate", "refute", "interpret"):
            skip(s, "data or graph could not be loaded")
        return report

    estimand = dm = None
    if "identify" in cfg.stages:
        try:
            if cfg.zero_variance == "auto":
                zero = sorted(table.constant_nodes() & set(g.names) - {cfg.treatment, cfg.outcome})
            else:
                zero = list(cfg.zero_variance)
            estimand = identify(g, cfg.treatment, cfg.outcome, zero)
            report["estimand"] = estimand_dict(estimand, g)
            dm = encode(table, estimand, cfg.x_features)
            report["design"] = {
                "n": dm.n,
                "x_features": list(dm.x_names),
                "w_features": list(dm.w_names),
                "dropped_constant": list(dm.dropped),
                "threshold_m": dm.split.threshold,
            }
            stages["identify"] = {"status": "ok"}
        except Exception as exc:  # noqa: BLE001
            fail("identify", exc)
    else:
        skip("identify", "not requested")

    estimates: dict[str, EffectEstimate] = {}
    if "estimate" not in cfg.stages:
        skip("estimate", "not requested")
    elif dm is None:
        skip("estimate", "no design matrix (identify did not run)")
    else:
        try:
            estimates = estimate_all(dm, cfg.estimate)
            report["estimates"] = [estimate_dict(estimates[k]) for k in cfg.estimate.estimators]
            stages["estimate"] = {"status": "ok"}
        except Exception as exc:  # noqa: BLE001
            fail("estimate", exc)

    if "refute" not in cfg.stages:
        skip("refute", "not requested")
    elif not estimates:
        skip("refute", "no estimates to refute")
    else:
        try:
            report["refutations"] = refutations(dm, estimates, cfg)
            stages["refute"] = {"status": "ok"}
        except Exception as exc:  # noqa: BLE001
            fail("refute", exc)

    dot = None
    if "interpret" not in cfg.stages:
        skip("interpret", "not requested")
    else:
        source = cfg.interpret.estimator
        if source not in estimates:
            skip("interpret", f"estimator {source} was not estimated")
        else:
            try:
                tree = fit_cate_tree(dm.x, estimates[source].cate, cfg.interpret.max_depth, dm.x_names)
                report["interpretation"] = {
                    "estimator": source,
                    "max_depth": cfg.interpret.max_depth,
                    "leaves": tree.leaf_table(),
                }
                dot = render_dot(tree, f"CATE of {cfg.treatment} on {cfg.outcome} ({source})")
                stages["interpret"] = {"status": "ok"}
            except Exception as exc:  # noqa: BLE001
                fail("interpret", exc)
    report["_dot"] = dot
    return report


def refutations(dm, estimates: dict[str, EffectEstimate], cfg: RunConfig) -> list[dict]:
    """One row per (estimator, strategy); estimators share each perturbed dataset."""
    rc = cfg.refute
    names = tuple(n for n in (rc.estimators or tuple(estimates)) if n in estimates)
    seed = derive_seed(cfg.seed, "refute")
    original = {n: estimates[n].effect for n in names}
    rows: dict[tuple[str, str], dict] = {}
    for strategy in rc.strategies:
        try:
            if strategy == "placebo":
                reps = refute_placebo(dm, names, cfg.estimate, rc.reps, seed, original)
            elif strategy == "common_cause":
                reps = refute_random_common_cause(dm, names, cfg.estimate, rc.strength, seed, original)
            else:
                reps = refute_subset(dm, names, cfg.estimate, rc.fraction, rc.reps, seed, original)
            for rep in reps:
                rows[rep.estimator, strategy] = rep.to_dict()
        except Exception as exc:  # noqa: BLE001 - recorded per row
            for name in names:
                rows[name, strategy] = {"strategy": SHORT_NAMES[strategy], "estimator": name,
                                        "original_effect": original[name],
                                        "error": f"{type(exc).__name__}: {exc}"}
    return [rows[n, s] for n in names for s in rc.strategies]


def dump_json(report: dict) -> str:
    body = {k: v for k, v in report.items() if not k.startswith("_")}
    return json.dumps(_plain(body), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_outputs(report: dict, out_dir: Path) -> None:
    doc = json.loads(dump_json(report))
    jsonschema.validate(doc, report_schema())
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(dump_json(report), encoding="utf-8")
    (out_dir / "report.md").write_text(render_markdown(doc), encoding="utf-8")
    if report.get("_dot"):
        (out_dir / "interpret.dot").write_text(report["_dot"], encoding="utf-8")


def run(cfg: RunConfig, out_dir: Path | None = None) -> tuple[dict, int]:
    """Execute and write ``report.json``, ``report.md`` and ``interpret.dot``.

    Returns the report and the exit code (0 success, 1 stage failure).
    """
    out = Path(out_dir) if out_dir is not None else cfg.resolve(cfg.output_dir)
    report = execute(cfg)
    write_outputs(report, out)
    return report, 1 if report["errors"] else 0


def without_timestamp(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != TIMESTAMP_KEY}

