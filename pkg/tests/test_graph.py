import itertools
import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graspcause.graph import (
    CONFOUNDERS, CausalGraph, GraphError, Node, backdoor_sets, build_default_graph, d_separated,
    identify, load_graph,
)

from conftest import random_dag


# -- brute-force oracle: enumerate every simple trail on the skeleton -----------------------

def _trails(g: CausalGraph, a: str, b: str):
    adj = {n: set(g.parents(n)) | set(g.children(n)) for n in g.names}

    def walk(path):
        last = path[-1]
        if last == b:
            yield list(path)
            return
        for nxt in sorted(adj[last]):
            if nxt not in path:
                yield from walk(path + [nxt])

    yield from walk([a])


def _blocked(g: CausalGraph, path, z) -> bool:
    for prev, mid, nxt in zip(path, path[1:], path[2:]):
        collider = prev in g.parents(mid) and nxt in g.parents(mid)
        if collider:
            if mid not in z and not (g.descendants(mid) & z):
                return True
        elif mid in z:
            return True
    return False


def oracle_dsep(g, a, b, z) -> bool:
    z = set(z)
    return all(_blocked(g, p, z) for p in _trails(g, a, b))


def oracle_backdoor(g, t, y):
    """Minimal sets satisfying the backdoor criterion by exhaustive subset search."""
    desc = g.descendants(t)
    pool = [n for n in g.names if n not in desc and n not in (t, y)]
    valid = []
    for r in range(len(pool) + 1):
        for combo in itertools.combinations(pool, r):
            z = set(combo)
            back = [p for p in _trails(g, t, y) if p[1] in g.parents(t)]
            if all(_blocked(g, p, z) for p in back):
                valid.append(frozenset(z))
    minimal = [s for s in valid if not any(o < s for o in valid)]
    return sorted(minimal, key=lambda s: tuple(sorted(s)))


# -- default graph ---------------------------------------------------------------------------

def test_default_graph_shape():
    g = build_default_graph()
    assert set(g.observed) == set(CONFOUNDERS) | {"D", "H"}
    assert g.unobserved == ("U",)
    assert ("D", "H") in g.edges
    for c in CONFOUNDERS:
        assert (c, "D") in g.edges and (c, "H") in g.edges


def test_default_backdoor_set_is_all_confounders():
    assert backdoor_sets(build_default_graph(), "D", "H") == [frozenset(CONFOUNDERS)]


def test_zero_variance_dominant_hand_reduces_set():
    g = build_default_graph()
    est = identify(g, "D", "H", zero_variance=["DO"])
    assert est.ordered_adjustment(g) == ["O", "OV", "S", "SS", "SC"]
    assert est.expression(g) == "d/dD E[H|O,OV,S,SS,SC]"
    assert any("DO" in w for w in est.warnings)


def test_unobserved_confounder_is_flagged():
    est = identify(build_default_graph(), "D", "H")
    assert not est.identifiable
    assert any("U" in w for w in est.warnings)


def test_unobserved_confounder_kept_in_graph_blocks_identification():
    assert backdoor_sets(build_default_graph(), "D", "H", ignore_unobserved=False) == []


def test_chain_needs_no_adjustment():
    g = CausalGraph((Node("A"), Node("B"), Node("C")), (("A", "B"), ("B", "C")))
    assert backdoor_sets(g, "A", "C") == [frozenset()]


# -- validation --------------------------------------------------------------------------

@pytest.mark.parametrize("edges", [
    (("A", "B"), ("B", "A")),
    (("A", "A"),),
    (("A", "Z"),),
    (("A", "B"), ("A", "B")),
])
def test_malformed_graphs_rejected(edges):
    with pytest.raises(GraphError):
        CausalGraph((Node("A"), Node("B")), edges)


def test_unknown_node_in_query():
    with pytest.raises(GraphError):
        backdoor_sets(build_default_graph(), "D", "nope")


def test_graph_json_round_trip(tmp_path):
    g = build_default_graph()
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_dict()))
    assert load_graph(path) == g


def test_dot_lists_every_edge():
    dot = build_default_graph().to_dot()
    assert dot.count("->") == 15
    assert "style=dashed" in dot


# -- oracles on random DAGs ------------------------------------------------------------------

def test_backdoor_matches_exhaustive_oracle_on_100_dags():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        g = random_dag(rng, int(rng.integers(3, 7)), p=float(rng.uniform(0.25, 0.6)))
        t, y = rng.choice(g.names, 2, replace=False)
        assert backdoor_sets(g, t, y) == oracle_backdoor(g, t, y), (g, t, y)
        checked += 1


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 7))
def test_dsep_matches_path_oracle(seed, n):
    rng = np.random.default_rng(seed)
    g = random_dag(rng, n)
    a, b = rng.choice(g.names, 2, replace=False)
    rest = [v for v in g.names if v not in (a, b)]
    z = {v for v in rest if rng.random() < 0.4}
    assert d_separated(g, a, b, z) == oracle_dsep(g, a, b, z)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8))
def test_dsep_matches_networkx(seed, n):
    rng = np.random.default_rng(seed)
    g = random_dag(rng, n)
    G = nx.DiGraph()
    G.add_nodes_from(g.names)
    G.add_edges_from(g.edges)
    a, b = rng.choice(g.names, 2, replace=False)
    z = {v for v in g.names if v not in (a, b) and rng.random() < 0.4}
    assert d_separated(g, a, b, z) == nx.is_d_separator(G, {a}, {b}, z)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 7))
def test_backdoor_sets_are_minimal_and_valid(seed, n):
    rng = np.random.default_rng(seed)
    g = random_dag(rng, n)
    t, y = rng.choice(g.names, 2, replace=False)
    sets = backdoor_sets(g, t, y)
    cut = g.without_outgoing(t)
    for s in sets:
        assert not s & g.descendants(t)
        assert d_separated(cut, t, y, s)
        for v in s:
            assert not d_separated(cut, t, y, s - {v})
    assert len(set(sets)) == len(sets)
    assert not any(a < b for a in sets for b in sets)


def test_dsep_rejects_conditioning_on_endpoints():
    g = build_default_graph()
    with pytest.raises(GraphError):
        d_separated(g, "D", "H", {"D"})
