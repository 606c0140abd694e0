"""Helpers shared by the experiment scripts."""

from __future__ import annotations

import json
from pathlib import Path

from graspcause.events import encode
from graspcause.graph import build_default_graph, identify

GRAPH = build_default_graph()
ESTIMAND = identify(GRAPH, "D", "H", zero_variance=["DO"])


def design(table):
    return encode(table, ESTIMAND)


def parse_seeds(text: str) -> list[int]:
    """``"0:20"`` -> 0..19, ``"1,5,9"`` -> those seeds."""
    if ":" in text:
        lo, hi = (int(v) for v in text.split(":"))
        return list(range(lo, hi))
    return [int(v) for v in text.split(",")]


def _plain(obj):
    """numpy scalars to Python scalars for json."""
    return obj.item()


def dump(path: str | None, doc: dict) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_plain) + "\n")
