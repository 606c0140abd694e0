"""Grasp-event logs: CSV ingestion, median split, design matrices, reversals."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .graph import Estimand

log = logging.getLogger(__name__)

CSV_HEADER = (
    "object_category",
    "object_volume_m3",
    "surface_id",
    "surface_in_container",
    "surface_sliding",
    "hand",
    "dominant_hand",
    "head_hand_distance_m",
)
HANDS = ("Left", "Right")
MIN_ROWS = 20

# graph node -> event attribute
NODE_FIELDS = {
    "O": "object_category",
    "OV": "object_volume",
    "S": "surface_id",
    "SS": "surface_sliding",
    "SC": "surface_in_container",
    "DO": "dominant_hand",
    "D": "head_hand_distance",
    "H": "hand",
}
CATEGORICAL = {"object_category", "surface_id"}
BINARY = {"surface_sliding", "surface_in_container", "dominant_hand"}


class EventError(ValueError):
    """Raised for malformed event logs or degenerate designs."""


@dataclass(frozen=True)
class GraspEvent:
    object_category: str
    object_volume: float
    surface_id: str
    surface_in_container: bool
    surface_sliding: bool
    hand: str
    dominant_hand: str
    head_hand_distance: float

    def __post_init__(self):
        if not self.object_category or not self.surface_id:
            raise EventError("categorical labels must be non-empty")
        for name in ("hand", "dominant_hand"):
            if getattr(self, name) not in HANDS:
                raise EventError(f"{name} must be Left or Right, got {getattr(self, name)!r}")
        for name in ("object_volume", "head_hand_distance"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise EventError(f"{name} must be positive, got {value!r}")

    def value(self, attr: str):
        """Numeric encoding of an attribute (booleans and hands as 0/1)."""
        v = getattr(self, attr)
        if attr in ("hand", "dominant_hand"):
            return 1.0 if v == "Right" else 0.0
        if isinstance(v, bool):
            return float(v)
        return v


@dataclass(frozen=True)
class EventTable:
    events: tuple[GraspEvent, ...]
    dataset_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def __len__(self) -> int:
        return len(self.events)

    def column(self, attr: str) -> list:
        if attr not in GraspEvent.__dataclass_fields__:
            raise EventError(f"unknown event field {attr!r}")
        return [getattr(e, attr) for e in self.events]

    def constant_nodes(self) -> set[str]:
        """Graph nodes whose event attribute takes a single value in this table."""
        return {node for node, attr in NODE_FIELDS.items() if len(set(self.column(attr))) <= 1}


def _parse_bool(text: str, line: int, name: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise EventError(f"line {line}: {name} must be true or false, got {text!r}")


def _parse_float(text: str, line: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise EventError(f"line {line}: {name} is not a number: {text!r}") from None
    if not math.isfinite(value) or value <= 0:
        raise EventError(f"line {line}: {name} must be positive, got {text!r}")
    return value


def parse_events(source: bytes | BinaryIO, dataset_id: str = "") -> EventTable:
    """Parse an event CSV (UTF-8, fixed header) into an :class:`EventTable`."""
    raw = source if isinstance(source, bytes) else source.read()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise EventError(f"event file is not UTF-8: {exc}") from None
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None:
        raise EventError("empty event file (missing header)")
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise EventError(f"line 1: unexpected header {header}; expected {list(CSV_HEADER)}")
    events = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise EventError(f"line {line}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        cells = dict(zip(CSV_HEADER, (c.strip() for c in row)))
        for name, v in cells.items():
            if v == "":
                raise EventError(f"line {line}: missing value for {name}")
        for name in ("hand", "dominant_hand"):
            if cells[name] not in HANDS:
                raise EventError(f"line {line}: unknown {name} label {cells[name]!r}")
        events.append(
            GraspEvent(
                object_category=cells["object_category"],
                object_volume=_parse_float(cells["object_volume_m3"], line, "object_volume_m3"),
                surface_id=cells["surface_id"],
                surface_in_container=_parse_bool(cells["surface_in_container"], line, "surface_in_container"),
                surface_sliding=_parse_bool(cells["surface_sliding"], line, "surface_sliding"),
                hand=cells["hand"],
                dominant_hand=cells["dominant_hand"],
                head_hand_distance=_parse_float(cells["head_hand_distance_m"], line, "head_hand_distance_m"),
            )
        )
    if not events:
        raise EventError("no events")
    return EventTable(tuple(events), dataset_id)


def read_events(path: str | Path, dataset_id: str | None = None) -> EventTable:
    path = Path(path)
    with open(path, "rb") as fh:
        return parse_events(fh, dataset_id if dataset_id is not None else path.stem)


def format_events(table: EventTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for e in table.events:
        writer.writerow(
            [
                e.object_category,
                repr(e.object_volume),
                e.surface_id,
                "true" if e.surface_in_container else "false",
                "true" if e.surface_sliding else "false",
                e.hand,
                e.dominant_hand,
                repr(e.head_hand_distance),
            ]
        )
    return buf.getvalue()


def write_events(table: EventTable, path: str | Path) -> None:
    Path(path).write_text(format_events(table), encoding="utf-8")


@dataclass(frozen=True)
class SplitSpec:
    threshold: float
    close_range: tuple[float, float]
    far_range: tuple[float, float]
    n_close: int
    n_far: int

    def assign(self, distances) -> np.ndarray:
        """1 for far, 0 for close."""
        return (np.asarray(distances, dtype=float) > self.threshold).astype(float)


def median_split(distances: Sequence[float]) -> SplitSpec:
    """Binarize distances at the sample median; ties with the median go to close."""
    d = np.asarray(distances, dtype=float)
    if d.ndim != 1 or d.size < 2:
        raise EventError("median split needs at least 2 values")
    threshold = float(np.median(d))
    close = d[d <= threshold]
    far = d[d > threshold]
    if close.size == 0 or far.size == 0:
        raise EventError("median split leaves one bin empty (values are identical at the median)")
    return SplitSpec(
        threshold=threshold,
        close_range=(float(close.min()), float(close.max())),
        far_range=(float(far.min()), float(far.max())),
        n_close=int(close.size),
        n_far=int(far.size),
    )


@dataclass(frozen=True)
class DesignMatrix:
    """Outcome, treatment, heterogeneity and control blocks sharing one row index."""

    y: np.ndarray
    t: np.ndarray
    x: np.ndarray
    w: np.ndarray
    x_names: tuple[str, ...] = ()
    w_names: tuple[str, ...] = ()
    dropped: tuple[str, ...] = field(default=(), compare=False)
    split: SplitSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        t = np.array(self.t, dtype=float).reshape(-1)
        n = y.size
        x = np.array(self.x, dtype=float).reshape(n, -1) if n else np.zeros((0, 0))
        w = np.array(self.w, dtype=float).reshape(n, -1) if n else np.zeros((0, 0))
        if t.size != n:
            raise EventError("blocks disagree on row count")
        if n < MIN_ROWS:
            raise EventError(f"design needs at least {MIN_ROWS} rows, got {n}")
        for name, arr in (("y", y), ("t", t), ("x", x), ("w", w)):
            if not np.all(np.isfinite(arr)):
                raise EventError(f"{name} contains missing or non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.unique(y).size < 2:
            raise EventError("outcome has no variation")
        if np.unique(t).size < 2:
            raise EventError("treatment has no variation")
        x_names = tuple(self.x_names) or tuple(f"x{i}" for i in range(x.shape[1]))
        w_names = tuple(self.w_names) or tuple(f"w{i}" for i in range(w.shape[1]))
        if len(x_names) != x.shape[1] or len(w_names) != w.shape[1]:
            raise EventError("feature names do not match block widths")
        object.__setattr__(self, "x_names", x_names)
        object.__setattr__(self, "w_names", w_names)
        object.__setattr__(self, "dropped", tuple(self.dropped))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def binary_treatment(self) -> bool:
        return bool(np.isin(self.t, (0.0, 1.0)).all())

    @property
    def features(self) -> np.ndarray:
        """Nuisance-model inputs: heterogeneity features followed by controls."""
        return np.hstack([self.x, self.w])

    def take(self, idx) -> "DesignMatrix":
        idx = np.asarray(idx)
        return DesignMatrix(
            self.y[idx], self.t[idx], self.x[idx], self.w[idx],
            self.x_names, self.w_names, self.dropped, self.split,
        )

    def replace(self, **changes) -> "DesignMatrix":
        fields = dict(
            y=self.y, t=self.t, x=self.x, w=self.w, x_names=self.x_names,
            w_names=self.w_names, dropped=self.dropped, split=self.split,
        )
        fields.update(changes)
        return DesignMatrix(**fields)


def _attr_for(feature: str) -> str:
    attr = NODE_FIELDS.get(feature, feature)
    if attr not in GraspEvent.__dataclass_fields__:
        raise EventError(f"requested feature {feature!r} is not an event field")
    return attr


def encode(
    table: EventTable, estimand: Estimand, x_features: Sequence[str] = ("object_volume",)
) -> DesignMatrix:
    """Encode events into outcome/treatment/heterogeneity/control blocks.

    The outcome is hand-selection (Right=1); the treatment is the median split
    of head-hand distance (far=1). Categorical controls are fully one-hot
    encoded and constant control columns are dropped.
    """
    if len(table) == 0:
        raise EventError("empty table")
    if NODE_FIELDS.get(estimand.treatment) != "head_hand_distance" or NODE_FIELDS.get(estimand.outcome) != "hand":
        raise EventError(
            f"encoding supports treatment D and outcome H, got {estimand.treatment} -> {estimand.outcome}"
        )
    x_attrs = [_attr_for(f) for f in x_features]
    for attr in x_attrs:
        if attr in CATEGORICAL or attr in ("hand", "head_hand_distance"):
            raise EventError(f"heterogeneity feature {attr!r} must be numeric and not the treatment/outcome")
    split = median_split(table.column("head_hand_distance"))
    t = split.assign(table.column("head_hand_distance"))
    y = np.array([e.value("hand") for e in table.events])

    x_cols = [np.array([e.value(a) for e in table.events], dtype=float) for a in x_attrs]
    for attr, col in zip(x_attrs, x_cols):
        if np.unique(col).size < 2:
            raise EventError(f"heterogeneity feature {attr!r} is constant")
    x = np.column_stack(x_cols) if x_cols else np.zeros((len(table), 0))

    w_cols: list[np.ndarray] = []
    w_names: list[str] = []
    order = [n for n in NODE_FIELDS if n in estimand.adjustment_set]
    unknown = sorted(set(estimand.adjustment_set) - set(NODE_FIELDS))
    if unknown:
        raise EventError(f"adjustment variables {unknown} have no event field")
    for node in order:
        attr = NODE_FIELDS[node]
        if attr in x_attrs:
            continue
        values = table.column(attr)
        if attr in CATEGORICAL:
            for level in sorted(set(values)):
                w_cols.append(np.array([v == level for v in values], dtype=float))
                w_names.append(f"{attr}={level}")
        else:
            w_cols.append(np.array([e.value(attr) for e in table.events], dtype=float))
            w_names.append(attr)
    keep_cols, keep_names, dropped = [], [], []
    for col, name in zip(w_cols, w_names):
        if np.unique(col).size < 2:
            dropped.append(name)
        else:
            keep_cols.append(col)
            keep_names.append(name)
    if dropped:
        log.warning("dropping constant control columns: %s", ", ".join(dropped))
    w = np.column_stack(keep_cols) if keep_cols else np.zeros((len(table), 0))
    return DesignMatrix(
        y=y, t=t, x=x, w=w,
        x_names=tuple(x_attrs), w_names=tuple(keep_names),
        dropped=tuple(dropped), split=split,
    )


# --- reversals -------------------------------------------------------------

def _sign(value: float, eps: float = 1e-12) -> str:
    if value > eps:
        return "pos"
    if value < -eps:
        return "neg"
    return "zero"


@dataclass(frozen=True)
class ReversalReport:
    aggregate_sign: str
    stratum_signs: dict
    reversal: bool
    warnings: tuple[str, ...] = ()


def is_reversal(aggregate_sign: str, stratum_signs: Iterable[str]) -> bool:
    nonzero = [s for s in stratum_signs if s != "zero"]
    if aggregate_sign == "zero" or not nonzero:
        return False
    return all(s != aggregate_sign for s in nonzero)


def reversal_from_counts(table: np.ndarray) -> bool:
    """Reversal test on a K x 2 x 2 array indexed [stratum, treatment, outcome].

    Entries may be counts or probabilities.
    """
    table = np.asarray(table, dtype=float)
    agg = table.sum(axis=0)

    def diff(m):
        n1, n0 = m[1].sum(), m[0].sum()
        if n1 <= 0 or n0 <= 0:
            return 0.0
        return m[1, 1] / n1 - m[0, 1] / n0

    return is_reversal(_sign(diff(agg)), [_sign(diff(s)) for s in table])


def reversal_report(table: EventTable, segregate_by: str) -> ReversalReport:
    """Compare the far-vs-close difference in P(Right) overall and per stratum."""
    attr = _attr_for(segregate_by)
    if attr not in CATEGORICAL and attr not in BINARY:
        raise EventError(f"cannot segregate by non-categorical field {attr!r}")
    if len(table) < 2:
        raise EventError("table too small for a reversal check")
    t = median_split(table.column("head_hand_distance")).assign(table.column("head_hand_distance"))
    y = np.array([e.value("hand") for e in table.events])
    levels = np.array([str(v) for v in table.column(attr)])

    def diff(mask):
        tt, yy = t[mask], y[mask]
        if (tt == 1).sum() == 0 or (tt == 0).sum() == 0:
            return None
        return yy[tt == 1].mean() - yy[tt == 0].mean()

    warnings = []
    agg = diff(np.ones(len(t), dtype=bool))
    strata = {}
    for level in sorted(set(levels)):
        d = diff(levels == level)
        if d is None:
            warnings.append(f"stratum {attr}={level} has a single treatment arm")
            strata[level] = "zero"
        else:
            strata[level] = _sign(d)
    agg_sign = _sign(agg) if agg is not None else "zero"
    return ReversalReport(agg_sign, strata, is_reversal(agg_sign, strata.values()), tuple(warnings))


def simulate_reversal_rate(draws: int = 100_000, seed: int = 0) -> float:
    """Fraction of 2x2x2 tables, uniform on the probability simplex, showing a reversal."""
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(8), size=draws).reshape(draws, 2, 2, 2)
    agg = p.sum(axis=1)

    def diff(m):
        return m[..., 1, 1] / m[..., 1, :].sum(-1) - m[..., 0, 1] / m[..., 0, :].sum(-1)

    a = np.sign(diff(agg))
    s = np.sign(diff(p))
    rev = (a != 0) & np.all((s == -a[:, None]) | (s == 0), axis=1) & np.any(s != 0, axis=1)
    return float(rev.mean())


# --- summaries -------------------------------------------------------------

def summarize(table: EventTable) -> dict:
    """Table-1 style frequency breakdown of an event table."""
    objects = Counter(table.column("object_category"))
    volumes = {}
    for e in table.events:
        volumes.setdefault(e.object_category, []).append(e.object_volume)
    surfaces = Counter(table.column("surface_id"))
    flags = {e.surface_id: (e.surface_in_container, e.surface_sliding) for e in table.events}
    hands = Counter(table.column("hand"))
    dominant = Counter(table.column("dominant_hand"))
    split = median_split(table.column("head_hand_distance"))
    return {
        "dataset_id": table.dataset_id,
        "n": len(table),
        "objects": {
            k: {"count": objects[k], "volume_m3": float(np.median(volumes[k]))} for k in sorted(objects)
        },
        "surfaces": {
            k: {"count": surfaces[k], "in_container": flags[k][0], "sliding": flags[k][1]}
            for k in sorted(surfaces)
        },
        "hand": {h: hands.get(h, 0) for h in HANDS},
        "dominant_hand": {h: dominant.get(h, 0) for h in HANDS},
        "distance": {
            "threshold_m": split.threshold,
            "close": {"count": split.n_close, "range_m": list(split.close_range)},
            "far": {"count": split.n_far, "range_m": list(split.far_range)},
        },
    }
