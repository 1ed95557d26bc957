"""Edge-list I/O and a seeded generator for review-site shaped graphs.

File format, one edge per line, tab separated::

    src_id  dst_id  src_type  dst_type  edge_type  weight

Lines starting with ``#`` are comments.  ``save_graph`` additionally writes
``#node<TAB>id<TAB>type`` comment lines so that node order and isolated
nodes survive a round trip; ``load_graph`` honours them when present.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InfeasibleParams, ParseError, TypeConflict
from .graph import EdgeType, HinGraph, NodeType, build_graph, _label

_INT = re.compile(r"-?\d+\Z")

U, I, C, R = NodeType.USER, NodeType.ITEM, NodeType.CATEGORY, NodeType.REVIEW
# (src type, edge type, dst type) triples the generator may emit.
SCHEMA = frozenset({
    (U, EdgeType.RATED, I), (I, EdgeType.RATED, U),
    (U, EdgeType.REVIEWED, I), (I, EdgeType.REVIEWED, U),
    (I, EdgeType.HAS_REVIEW, R), (R, EdgeType.HAS_REVIEW, I),
    (I, EdgeType.BELONGS_TO, C), (C, EdgeType.BELONGS_TO, I),
    (U, EdgeType.FOLLOWS, U),
    (I, EdgeType.SIMILARITY, I), (R, EdgeType.SIMILARITY, R),
})


def load_graph(path) -> HinGraph:
    decls: dict = {}
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if line.startswith("#"):
                if line.startswith("#node\t"):
                    parts = line.split("\t")
                    if len(parts) != 3:
                        raise ParseError(lineno, "node declaration needs an id and a type")
                    _declare(decls, parts[1], parts[2], lineno)
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ParseError(lineno, f"expected 6 tab-separated fields, got {len(parts)}")
            src, dst, src_type, dst_type, kind, weight = parts
            try:
                w = float(weight)
            except ValueError:
                raise ParseError(lineno, f"weight {weight!r} is not a number") from None
            if not w >= 0.0:
                raise ParseError(lineno, f"weight {weight!r} is negative")
            _declare(decls, src, src_type, lineno)
            _declare(decls, dst, dst_type, lineno)
            edges.append((src, dst, kind, w))
    if decls and all(_INT.match(name) for name in decls):
        convert = int
    else:
        convert = str
    nodes = [(convert(name), kind) for name, kind in decls.items()]
    return build_graph(nodes, [(convert(s), convert(d), k, w) for s, d, k, w in edges])


def _declare(decls: dict, name: str, kind: str, lineno: int) -> None:
    if not name or not kind:
        raise ParseError(lineno, "empty node id or type")
    seen = decls.setdefault(name, kind)
    if seen != kind:
        raise TypeConflict(f"line {lineno}: node {name!r} typed {seen!r} earlier, {kind!r} here")


def graph_stats(g: HinGraph) -> dict:
    nodes, edges = g.type_counts()
    stats = {"nodes": g.n_nodes, "edges": g.n_edges}
    stats.update({f"nodes.{k}": v for k, v in nodes.items()})
    stats.update({f"edges.{k}": v for k, v in edges.items()})
    return stats


def save_graph(g: HinGraph, path, stats: bool = True) -> None:
    """Write the edge list; with ``stats`` also ``<path>.stats`` (``key: value`` lines)."""
    path = Path(path)
    types = [_label(t) for t in g.node_types]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# src_id\tdst_id\tsrc_type\tdst_type\tedge_type\tweight\n")
        for v, name in enumerate(g.names):
            fh.write(f"#node\t{name}\t{types[v]}\n")
        for s, d, kind, w in g.edges():
            fh.write(f"{g.names[s]}\t{g.names[d]}\t{types[s]}\t{types[d]}\t{_label(kind)}\t{w!r}\n")
    if stats:
        with open(str(path) + ".stats", "w", encoding="utf-8") as fh:
            for key, value in graph_stats(g).items():
                fh.write(f"{key}: {value}\n")


@dataclass(frozen=True)
class SynthParams:
    n_users: int = 100
    n_items: int = 2000
    n_categories: int = 8
    n_reviews: int = 2148
    actions_per_user: tuple = (10, 100)
    follows_enabled: bool = False
    similarity_edge_rate: float = 0.05
    rng_seed: int = 0


def schema_violations(g: HinGraph) -> list[tuple]:
    """Edges whose (src type, edge type, dst type) is outside ``SCHEMA``."""
    types = g.node_types
    return [(s, d, k) for s, d, k, _ in g.edges() if (types[s], k, types[d]) not in SCHEMA]


def _check(p: SynthParams) -> None:
    lo, hi = p.actions_per_user
    if min(p.n_users, p.n_items, p.n_categories) < 1 or p.n_reviews < 0:
        raise InfeasibleParams("node counts must be >= 1 (reviews >= 0)")
    if not 1 <= lo <= hi <= p.n_items:
        raise InfeasibleParams(f"action range {p.actions_per_user} must lie within [1, {p.n_items}]")
    if p.similarity_edge_rate < 0:
        raise InfeasibleParams("similarity_edge_rate must be >= 0")


def _zipf(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def _similarity_pairs(rng, names: list, rate: float) -> list:
    n = len(names)
    want = min(int(round(rate * n)), n * (n - 1) // 2)
    pairs: set = set()
    while len(pairs) < want:
        a, b = sorted(int(x) for x in rng.choice(n, 2, replace=False))
        pairs.add((a, b))
    out = []
    for a, b in sorted(pairs):
        # Retained cosine scores sit above the usual 0.85 cut-off.
        w = round(float(rng.uniform(0.85, 1.0)), 6)
        out += [(names[a], names[b], EdgeType.SIMILARITY, w), (names[b], names[a], EdgeType.SIMILARITY, w)]
    return out


def generate_synth(params: SynthParams) -> HinGraph:
    """Users rate items, write reviews of rated items and optionally follow
    each other; items belong to categories drawn from a heavy-tailed
    popularity law.  Interaction edges have unit weight and, except
    *follows*, come in both directions."""
    _check(params)
    rng = np.random.default_rng(params.rng_seed)
    users = [f"u{i}" for i in range(params.n_users)]
    items = [f"i{i}" for i in range(params.n_items)]
    cats = [f"c{i}" for i in range(params.n_categories)]
    reviews = [f"r{i}" for i in range(params.n_reviews)]
    nodes = ([(u, NodeType.USER) for u in users] + [(i, NodeType.ITEM) for i in items]
             + [(c, NodeType.CATEGORY) for c in cats] + [(r, NodeType.REVIEW) for r in reviews])
    edges = []

    n_cat = params.n_categories
    category = rng.choice(n_cat, size=params.n_items, p=_zipf(n_cat, 1.0))
    seeded = min(n_cat, params.n_items)
    category[:seeded] = np.arange(seeded)
    for i, c in enumerate(category):
        edges += [(items[i], cats[c], EdgeType.BELONGS_TO, 1.0), (cats[c], items[i], EdgeType.BELONGS_TO, 1.0)]

    popularity = np.empty(params.n_items)
    popularity[rng.permutation(params.n_items)] = _zipf(params.n_items, 0.8)
    lo, hi = params.actions_per_user
    ratings = []
    for u in range(params.n_users):
        n_actions = int(rng.integers(lo, hi + 1))
        n_follow = 0
        if params.follows_enabled and params.n_users > 1:
            # Every user keeps at least one rating so it touches the item side.
            n_follow = min(int(rng.binomial(n_actions, 0.1)), params.n_users - 1, n_actions - 1)
        rated = np.sort(rng.choice(params.n_items, size=n_actions - n_follow, replace=False, p=popularity))
        for i in rated:
            ratings.append((u, int(i)))
            edges += [(users[u], items[i], EdgeType.RATED, 1.0), (items[i], users[u], EdgeType.RATED, 1.0)]
        if n_follow:
            others = np.array([v for v in range(params.n_users) if v != u])
            for v in np.sort(rng.choice(others, size=n_follow, replace=False)):
                edges.append((users[u], users[v], EdgeType.FOLLOWS, 1.0))

    if params.n_reviews > len(ratings):
        raise InfeasibleParams(f"{params.n_reviews} reviews need as many ratings, got {len(ratings)}")
    picked = np.sort(rng.choice(len(ratings), size=params.n_reviews, replace=False))
    for r, idx in enumerate(picked):
        u, i = ratings[idx]
        edges += [(users[u], items[i], EdgeType.REVIEWED, 1.0), (items[i], users[u], EdgeType.REVIEWED, 1.0),
                  (items[i], reviews[r], EdgeType.HAS_REVIEW, 1.0), (reviews[r], items[i], EdgeType.HAS_REVIEW, 1.0)]

    if params.similarity_edge_rate > 0:
        edges += _similarity_pairs(rng, items, params.similarity_edge_rate)
        if len(reviews) > 1:
            edges += _similarity_pairs(rng, reviews, params.similarity_edge_rate)
    g = build_graph(nodes, edges)
    bad = schema_violations(g)
    if bad:
        raise AssertionError(f"generator emitted edges outside the schema: {bad[:3]}")
    return g


def reachable_within(g: HinGraph, source: int, hops: int) -> set[int]:
    """Nodes reachable from ``source`` along directed edges in at most ``hops`` steps."""
    seen = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        if seen[v] == hops:
            continue
        for e in g.out_adj[v]:
            if e.node not in seen:
                seen[e.node] = seen[v] + 1
                queue.append(e.node)
    return set(seen)
