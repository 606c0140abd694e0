"""Causal DAGs, d-separation and backdoor adjustment sets.

The default graph encodes reach-to-grasp behaviour: object category (O),
object volume (OV), surface (S), sliding surface (SS), surface inside a
container (SC) and hand dominance (DO) each act on both hand-distance (D)
and hand-selection (H), with D acting on H. An unobserved node U stands in
for confounders the model does not capture.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Iterable


class GraphError(ValueError):
    """Raised for malformed graphs or unknown node identifiers."""


@dataclass(frozen=True)
class Node:
    name: str
    observed: bool = True


@dataclass(frozen=True)
class CausalGraph:
    nodes: tuple[Node, ...]
    edges: tuple[tuple[str, str], ...]
    _parents: dict = field(init=False, repr=False, compare=False)
    _children: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        names = [n.name for n in self.nodes]
        if any(not name for name in names):
            raise GraphError("node names must be non-empty")
        if len(set(names)) != len(names):
            raise GraphError(f"duplicate nodes in {names}")
        if len(set(self.edges)) != len(self.edges):
            raise GraphError("duplicate edges")
        known = set(names)
        parents = {name: [] for name in names}
        children = {name: [] for name in names}
        for a, b in self.edges:
            if a not in known or b not in known:
                raise GraphError(f"edge {a}->{b} references an undeclared node")
            if a == b:
                raise GraphError(f"self-loop on {a}")
            parents[b].append(a)
            children[a].append(b)
        object.__setattr__(self, "_parents", {k: tuple(v) for k, v in parents.items()})
        object.__setattr__(self, "_children", {k: tuple(v) for k, v in children.items()})
        try:
            self.topological_order()
        except CycleError as exc:
            raise GraphError(f"graph has a cycle: {exc.args[1]}") from None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes if n.observed)

    @property
    def unobserved(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes if not n.observed)

    def check(self, *names: str) -> None:
        for name in names:
            if name not in self._parents:
                raise GraphError(f"unknown node {name!r}")

    def parents(self, name: str) -> tuple[str, ...]:
        self.check(name)
        return self._parents[name]

    def children(self, name: str) -> tuple[str, ...]:
        self.check(name)
        return self._children[name]

    def topological_order(self) -> tuple[str, ...]:
        sorter = TopologicalSorter({name: self._parents[name] for name in self.names})
        return tuple(sorter.static_order())

    def descendants(self, name: str) -> set[str]:
        """Strict descendants of ``name``."""
        self.check(name)
        seen: set[str] = set()
        stack = list(self._children[name])
        while stack:
            node = stack.pop()
            if node not in seen:
                seen.add(node)
                stack.extend(self._children[node])
        return seen

    def ancestors(self, names: Iterable[str]) -> set[str]:
        """``names`` together with all their ancestors."""
        stack = list(names)
        self.check(*stack)
        seen: set[str] = set()
        while stack:
            node = stack.pop()
            if node not in seen:
                seen.add(node)
                stack.extend(self._parents[node])
        return seen

    def without_outgoing(self, name: str) -> "CausalGraph":
        self.check(name)
        return CausalGraph(self.nodes, tuple(e for e in self.edges if e[0] != name))

    def without_edge(self, a: str, b: str) -> "CausalGraph":
        if (a, b) not in self.edges:
            raise GraphError(f"no edge {a}->{b}")
        return CausalGraph(self.nodes, tuple(e for e in self.edges if e != (a, b)))

    def observed_subgraph(self) -> "CausalGraph":
        """Drop unobserved nodes and every edge touching them."""
        keep = set(self.observed)
        return CausalGraph(
            tuple(n for n in self.nodes if n.observed),
            tuple(e for e in self.edges if e[0] in keep and e[1] in keep),
        )

    def to_dict(self) -> dict:
        return {
            "nodes": [{"name": n.name, "observed": n.observed} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CausalGraph":
        try:
            nodes = tuple(Node(str(n["name"]), bool(n.get("observed", True))) for n in data["nodes"])
            edges = tuple((a, b) for a, b in data["edges"])
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed graph document: {exc}") from None
        return cls(nodes, edges)

    def to_dot(self) -> str:
        lines = ["digraph causal_graph {", "  rankdir=LR;"]
        for node in self.nodes:
            style = "" if node.observed else ", style=dashed"
            lines.append(f'  "{node.name}" [shape=ellipse{style}];')
        for a, b in self.edges:
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def load_graph(spec: str | Path) -> CausalGraph:
    """Load a graph from a JSON file, or return the default graph for ``"default"``."""
    if str(spec) == "default":
        return build_default_graph()
    with open(spec, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{spec}: invalid JSON ({exc})") from None
    return CausalGraph.from_dict(data)


CONFOUNDERS = ("O", "OV", "S", "SS", "SC", "DO")


def build_default_graph() -> CausalGraph:
    nodes = tuple(Node(name) for name in CONFOUNDERS + ("D", "H")) + (Node("U", observed=False),)
    edges = [
        ("D", "H"),
        ("O", "D"),
        ("O", "H"),
        ("S", "D"),
        ("S", "H"),
        ("OV", "H"),
        ("OV", "D"),
        ("SS", "D"),
        ("SS", "H"),
        ("SC", "D"),
        ("SC", "H"),
        ("DO", "H"),
        ("DO", "D"),
        # unobserved confounding; the targets are a modelling choice
        ("U", "D"),
        ("U", "H"),
    ]
    return CausalGraph(nodes, tuple(edges))


def d_separated(g: CausalGraph, a: str, b: str, z: Iterable[str]) -> bool:
    """True iff ``a`` and ``b`` are d-separated given ``z``.

    Uses the reachable-trail search: a trail can pass a non-collider only if
    it is not conditioned on, and a collider only if it is an ancestor of
    something in ``z``.
    """
    z = set(z)
    g.check(a, b, *z)
    if a == b:
        raise GraphError("d-separation needs two distinct nodes")
    if a in z or b in z:
        raise GraphError("conditioning set must not contain the queried nodes")
    anc = g.ancestors(z)
    # (node, arrived_from_child): True means we entered the node against an edge
    frontier = [(a, True)]
    visited: set[tuple[str, bool]] = set()
    while frontier:
        node, up = frontier.pop()
        if (node, up) in visited:
            continue
        visited.add((node, up))
        if node == b:
            return False
        if up:
            if node in z:
                continue
            frontier.extend((p, True) for p in g.parents(node))
            frontier.extend((c, False) for c in g.children(node))
        else:
            if node not in z:
                frontier.extend((c, False) for c in g.children(node))
            if node in anc:
                frontier.extend((p, True) for p in g.parents(node))
    return True


def _sort_key(s: frozenset[str]) -> tuple[str, ...]:
    return tuple(sorted(s))


def backdoor_sets(
    g: CausalGraph, t: str, y: str, *, ignore_unobserved: bool = True
) -> list[frozenset[str]]:
    """All inclusion-minimal backdoor adjustment sets for ``t`` on ``y``.

    With ``ignore_unobserved`` the search runs on the observed subgraph;
    otherwise unobserved nodes stay in the graph but may not be conditioned
    on, so an unobserved confounder leaves the list empty.
    """
    g.check(t, y)
    if t == y:
        raise GraphError("treatment and outcome must differ")
    work = g.observed_subgraph() if ignore_unobserved else g
    work.check(t, y)
    cut = work.without_outgoing(t)
    banned = work.descendants(t) | {t, y}
    candidates = [n for n in work.names if n not in banned and n in set(g.observed)]
    found: list[frozenset[str]] = []
    for size in range(len(candidates) + 1):
        for combo in itertools.combinations(candidates, size):
            s = frozenset(combo)
            if any(f <= s for f in found):
                continue
            if d_separated(cut, t, y, s):
                found.append(s)
    return sorted(found, key=_sort_key)


@dataclass(frozen=True)
class Estimand:
    treatment: str
    outcome: str
    adjustment_set: frozenset[str]
    identifiable: bool
    warnings: tuple[str, ...] = ()

    def ordered_adjustment(self, g: CausalGraph) -> list[str]:
        return [n for n in g.names if n in self.adjustment_set]

    def expression(self, g: CausalGraph) -> str:
        cond = ",".join(self.ordered_adjustment(g))
        inner = f"E[{self.outcome}|{cond}]" if cond else f"E[{self.outcome}]"
        return f"d/d{self.treatment} {inner}"


def identify(
    g: CausalGraph, t: str, y: str, zero_variance: Iterable[str] = ()
) -> Estimand:
    """Backdoor identification of the effect of ``t`` on ``y``.

    Members of ``zero_variance`` (variables constant in the data at hand) are
    removed from the selected adjustment set since they cannot be adjusted for.
    """
    zero_variance = set(zero_variance)
    g.check(t, y, *zero_variance)
    warnings: list[str] = []
    identifiable = True
    sets = backdoor_sets(g, t, y)
    if not sets:
        identifiable = False
        warnings.append(f"no backdoor adjustment set exists for {t} -> {y}")
        chosen: frozenset[str] = frozenset()
    else:
        chosen = sets[0]
        if len(sets) > 1:
            warnings.append(f"{len(sets)} minimal adjustment sets; selected the first")
    dropped = sorted(chosen & zero_variance)
    if dropped:
        warnings.append(f"dropped zero-variance variables {dropped} from the adjustment set")
        chosen = chosen - zero_variance
    for u in g.unobserved:
        adjacent = set(g.parents(u)) | set(g.children(u))
        if t in adjacent and y in adjacent:
            identifiable = False
            warnings.append(
                f"unobserved node {u} is adjacent to both {t} and {y}; "
                "the estimate is bias-reduced, not bias-free"
            )
    return Estimand(t, y, chosen, identifiable, tuple(warnings))
