"""Command-line entry point: ``graspcause <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, derive_seed, load_config, with_overrides
from .effects import ESTIMATORS
from .events import EventError, read_events, summarize
from .graph import GraphError, identify, load_graph
from .pipeline import dump_json, execute, run, write_outputs
from .report import dataset_table, render_markdown
from .synth import PRESETS, Constant, ScenarioError, Step, generate, preset, write_scenario

log = logging.getLogger("graspcause")

EXIT_OK, EXIT_STAGE, EXIT_CONFIG = 0, 1, 2

_STAGES = {
    "estimate": ("identify", "estimate"),
    "refute": ("identify", "estimate", "refute"),
    "interpret": ("identify", "estimate", "interpret"),
}


def _common(p: argparse.ArgumentParser, config_required=False) -> None:
    p.add_argument("--config", required=config_required, help="run config JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graspcause", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="identify, estimate, refute and interpret from one config")
    _common(p, config_required=True)

    p = sub.add_parser("identify", help="print the backdoor adjustment set")
    _common(p)
    p.add_argument("--graph", default=None, help='"default" or a graph JSON path')
    p.add_argument("--treatment", default=None)
    p.add_argument("--outcome", default=None)
    p.add_argument("--zero-variance", default=None,
                   help='comma-separated nodes without variation, or "auto" (needs --data)')
    p.add_argument("--data", help="event CSV, used for --zero-variance auto")
    p.add_argument("--dot", help="write the graph in DOT format to this path")

    for name, help_ in (("estimate", "estimate effects"), ("refute", "estimate and refute"),
                        ("interpret", "estimate and fit the CATE tree")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--data", help="event CSV (when no --config is given)")
        if name != "interpret":
            p.add_argument("--estimators", help=f"comma-separated subset of {','.join(ESTIMATORS)}")

    p = sub.add_parser("synth", help="write a synthetic event CSV and its ground truth")
    p.add_argument("--preset", choices=PRESETS, default="dsv")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--stem", default=None, help="file stem (default: the preset name)")
    p.add_argument("--treatment", choices=("randomized", "confounded"), default="randomized")
    p.add_argument("--effect", default="constant:0",
                   help='"constant:TAU" or "step:THRESHOLD:LOW:HIGH" over object_volume')
    p.add_argument("--link", choices=("logistic", "linear"), default="logistic")
    p.add_argument("--volume-jitter", type=float, default=0.0)

    p = sub.add_parser("summarize", help="print frequency breakdowns of an event CSV")
    p.add_argument("data")
    p.add_argument("--json", action="store_true", help="print JSON instead of Markdown")
    return parser


def parse_effect(text: str):
    kind, *vals = text.split(":")
    try:
        nums = [float(v) for v in vals]
    except ValueError:
        raise ConfigError(f"bad --effect {text!r}") from None
    if kind == "constant" and len(nums) == 1:
        return Constant(nums[0])
    if kind == "step" and len(nums) == 3:
        return Step(*nums)
    raise ConfigError(f"bad --effect {text!r}; use constant:TAU or step:THR:LOW:HIGH")


def _check_paths(cfg: RunConfig) -> None:
    if not cfg.data_path.is_file():
        raise ConfigError(f"data file not found: {cfg.data_path}")
    if cfg.graph != "default" and not Path(cfg.graph_source).is_file():
        raise ConfigError(f"graph file not found: {cfg.graph_source}")


def _stage_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
        data = getattr(args, "data", None)
        cfg = with_overrides(cfg, seed=args.seed, data=str(Path(data).resolve()) if data else None)
    else:
        if not getattr(args, "data", None) or args.seed is None:
            raise ConfigError("give --config, or both --data and --seed")
        cfg = RunConfig(data=args.data, seed=args.seed)
        cfg = replace(cfg, estimate=replace(cfg.estimate, seed=derive_seed(args.seed, "estimate")))
    cfg = replace(cfg, stages=_STAGES[args.command])
    if getattr(args, "estimators", None):
        names = tuple(s.strip() for s in args.estimators.split(","))
        try:
            cfg = replace(cfg, estimate=replace(cfg.estimate, estimators=names))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if args.command == "interpret" and cfg.interpret.estimator not in cfg.estimate.estimators:
        cfg = replace(cfg, estimate=replace(cfg.estimate, estimators=(cfg.interpret.estimator,)))
    return cfg


def cmd_run(args) -> int:
    cfg = with_overrides(load_config(args.config), seed=args.seed)
    _check_paths(cfg)
    out = Path(args.out) if args.out else cfg.resolve(cfg.output_dir)
    report, code = run(cfg, out)
    print(f"wrote {out / 'report.json'} ({len(report['errors'])} stage errors)")
    return code


def cmd_stage(args) -> int:
    cfg = _stage_config(args)
    _check_paths(cfg)
    report = execute(cfg)
    doc = json.loads(dump_json(report))
    section = {k: doc[k] for k in ("estimand", "estimates", "refutations", "interpretation", "stages", "errors")
               if k in doc}
    print(render_markdown({"stages": doc["stages"], "errors": doc["errors"], **section}), end="")
    if args.command == "interpret" and report.get("_dot"):
        print(report["_dot"], end="")
    if args.out:
        write_outputs(report, Path(args.out))
    return EXIT_STAGE if report["errors"] else EXIT_OK


def cmd_identify(args) -> int:
    cfg = None
    if args.config:
        cfg = with_overrides(load_config(args.config), seed=args.seed)
    graph = args.graph or (cfg.graph_source if cfg else "default")
    treatment = args.treatment or (cfg.treatment if cfg else "D")
    outcome = args.outcome or (cfg.outcome if cfg else "H")
    zv = args.zero_variance if args.zero_variance is not None else (
        cfg.zero_variance if cfg else "")
    data = args.data or (str(cfg.data_path) if cfg else None)
    try:
        g = load_graph(graph)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load graph: {exc}") from None
    if zv == "auto":
        if not data:
            raise ConfigError("--zero-variance auto needs --data")
        try:
            table = read_events(data)
        except OSError as exc:
            raise ConfigError(str(exc)) from None
        zero = sorted(table.constant_nodes() & set(g.names) - {treatment, outcome})
    elif isinstance(zv, str):
        zero = [s.strip() for s in zv.split(",") if s.strip()]
    else:
        zero = list(zv)
    est = identify(g, treatment, outcome, zero)
    print("{" + ", ".join(est.ordered_adjustment(g)) + "}")
    print(est.expression(g))
    for w in est.warnings:
        print(f"warning: {w}")
    if args.dot:
        Path(args.dot).write_text(g.to_dot(), encoding="utf-8")
    return EXIT_OK


def cmd_synth(args) -> int:
    overrides = dict(treatment=args.treatment, effect=parse_effect(args.effect), link=args.link,
                     volume_jitter=args.volume_jitter, noise_seed=args.seed)
    cfg = preset(args.preset, args.n, **overrides)
    table, truth = generate(cfg)
    csv_path, side = write_scenario(table, truth, cfg, args.out, args.stem or args.preset)
    print(f"wrote {csv_path} ({len(table)} rows) and {side}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    try:
        table = read_events(args.data)
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    ds = summarize(table)
    if args.json:
        print(json.dumps(ds, indent=2, sort_keys=True))
    else:
        print("\n".join(dataset_table(ds)), end="")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "identify": cmd_identify, "estimate": cmd_stage, "refute": cmd_stage,
            "interpret": cmd_stage, "synth": cmd_synth, "summarize": cmd_summarize}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ScenarioError) as exc:
        print(f"graspcause: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GraphError, EventError) as exc:
        # single-stage commands: the stage itself failed
        print(f"graspcause: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
