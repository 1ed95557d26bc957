"""Typed heterogeneous graph storage and the coupled transition operator.

A :class:`HinGraph` is immutable once built.  Random walks never run on the
graph directly; they run on a :class:`TransitionView`, which mixes the
weight-normalized graph transitions with per-type similarity rows

    P = beta * W + (1 - beta) * S

and optionally removes a subset of one user's action edges, rescaling the
surviving entries of that user's row by ``1 / (1 - removed mass)``.

Rows of ``P`` may be sub-stochastic: a node without usable out-edges keeps
the missing mass in :attr:`TransitionView.missing`, and walk code sends that
mass back to the walk's seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Hashable, Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import (
    DuplicateEdge,
    NegativeWeight,
    NonStochasticSimilarity,
    NotAnAction,
    NotAUser,
    TypeConflict,
    UnknownEndpoint,
)


class NodeType(str, Enum):
    USER = "user"
    ITEM = "item"
    CATEGORY = "category"
    REVIEW = "review"
    AUTHOR = "author"


class EdgeType(str, Enum):
    RATED = "rated"
    REVIEWED = "reviewed"
    HAS_REVIEW = "has-review"
    BELONGS_TO = "belongs-to"
    FOLLOWS = "follows"
    HAS_AUTHOR = "has-author"
    SIMILARITY = "similarity"


# Unknown labels are kept as plain strings ("other" types).
NodeKind = Union[NodeType, str]
EdgeKind = Union[EdgeType, str]


def node_type(label) -> NodeKind:
    if isinstance(label, NodeType):
        return label
    try:
        return NodeType(label)
    except ValueError:
        return str(label)


def edge_type(label) -> EdgeKind:
    if isinstance(label, EdgeType):
        return label
    try:
        return EdgeType(label)
    except ValueError:
        return str(label)


def _label(kind) -> str:
    return kind.value if isinstance(kind, Enum) else kind


class Edge(NamedTuple):
    node: int
    type: EdgeKind
    weight: float


@dataclass(frozen=True, eq=False)
class HinGraph:
    """Directed, weighted, typed multigraph over dense node ids ``0..n-1``.

    ``out_adj[v]`` lists ``Edge(dst, type, weight)`` sorted by (dst, type);
    ``in_adj[v]`` mirrors it with ``Edge(src, type, weight)``.  ``names``
    keeps the external identifier of every node.
    """

    node_types: tuple
    out_adj: tuple
    in_adj: tuple
    names: tuple

    @property
    def n_nodes(self) -> int:
        return len(self.node_types)

    @cached_property
    def n_edges(self) -> int:
        return sum(len(row) for row in self.out_adj)

    @cached_property
    def _index(self) -> dict:
        return {name: i for i, name in enumerate(self.names)}

    def index(self, name) -> int:
        """Dense id of the node with external identifier ``name``."""
        try:
            return self._index[name]
        except KeyError:
            # CLI arguments arrive as strings even when the graph uses int ids.
            if isinstance(name, str):
                try:
                    return self._index[int(name)]
                except (ValueError, KeyError):
                    pass
            raise KeyError(f"unknown node {name!r}") from None

    def name(self, v: int):
        return self.names[v]

    def node_type(self, v: int) -> NodeKind:
        return self.node_types[v]

    def out_neighbors(self, v: int) -> list[int]:
        return sorted({e.node for e in self.out_adj[v]})

    def nodes_of_type(self, kind) -> list[int]:
        kind = node_type(kind)
        return [v for v, t in enumerate(self.node_types) if t == kind]

    def edges(self) -> Iterator[tuple[int, int, EdgeKind, float]]:
        for src, row in enumerate(self.out_adj):
            for dst, kind, w in row:
                yield src, dst, kind, w

    @property
    def is_heterogeneous(self) -> bool:
        node_kinds = set(self.node_types)
        edge_kinds = {e.type for row in self.out_adj for e in row}
        return len(node_kinds) + len(edge_kinds) > 2

    def type_counts(self) -> tuple[dict, dict]:
        nodes: dict = {}
        for t in self.node_types:
            nodes[_label(t)] = nodes.get(_label(t), 0) + 1
        edges: dict = {}
        for _, _, kind, _ in self.edges():
            edges[_label(kind)] = edges.get(_label(kind), 0) + 1
        return dict(sorted(nodes.items())), dict(sorted(edges.items()))


def _dense_order(ids: Sequence[Hashable]) -> list:
    if all(isinstance(i, (int, np.integer)) and not isinstance(i, bool) for i in ids):
        return sorted(int(i) for i in ids)
    return list(ids)


def build_graph(node_decls: Iterable, edge_decls: Iterable) -> HinGraph:
    """Build an immutable graph from ``(id, type)`` and ``(src, dst, type, w)``.

    Integer ids are densified in ascending order; any other ids keep their
    declaration order.  The original ids survive as ``graph.names``.
    """
    declared: dict = {}
    for nid, kind in node_decls:
        kind = node_type(kind)
        if nid in declared and declared[nid] != kind:
            raise TypeConflict(f"node {nid!r} declared as {_label(declared[nid])} and {_label(kind)}")
        declared[nid] = kind
    order = _dense_order(list(declared))
    index = {nid: i for i, nid in enumerate(order)}
    types = tuple(declared[nid] for nid in order)

    out: list[dict] = [dict() for _ in order]
    for src, dst, kind, weight in edge_decls:
        for end in (src, dst):
            if end not in index:
                raise UnknownEndpoint(f"edge ({src!r}, {dst!r}) references undeclared node {end!r}")
        weight = float(weight)
        if not weight >= 0.0 or math.isinf(weight):
            raise NegativeWeight(f"edge ({src!r}, {dst!r}) has weight {weight!r}")
        kind = edge_type(kind)
        s, d = index[src], index[dst]
        if kind == EdgeType.SIMILARITY and types[s] != types[d]:
            raise TypeConflict(f"similarity edge ({src!r}, {dst!r}) joins different node types")
        key = (d, _label(kind))
        if key in out[s]:
            raise DuplicateEdge(f"duplicate edge ({src!r}, {dst!r}, {_label(kind)})")
        out[s][key] = Edge(d, kind, weight)

    out_adj = tuple(tuple(row[k] for k in sorted(row)) for row in out)
    incoming: list[list] = [[] for _ in order]
    for s, row in enumerate(out_adj):
        for d, kind, w in row:
            incoming[d].append(Edge(s, kind, w))
    in_adj = tuple(tuple(sorted(row, key=lambda e: (e.node, _label(e.type)))) for row in incoming)
    return HinGraph(types, out_adj, in_adj, tuple(order))


@dataclass(frozen=True)
class ActionSet:
    """Out-edges of a user other than a self-loop, merged per target node.

    Parallel edges of different types to one target (say *rated* and
    *reviewed*) form one action whose weight is their sum.
    """

    user: int
    targets: tuple
    weights: tuple
    edge_types: tuple

    def __len__(self) -> int:
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)


def user_actions(g: HinGraph, user: int) -> ActionSet:
    if not 0 <= user < g.n_nodes or g.node_types[user] != NodeType.USER:
        raise NotAUser(f"node {user!r} is not a user")
    merged: dict[int, list] = {}
    for dst, kind, w in g.out_adj[user]:
        if dst == user or kind == EdgeType.SIMILARITY:
            continue
        slot = merged.setdefault(dst, [0.0, []])
        slot[0] += w
        slot[1].append(kind)
    targets = tuple(sorted(merged))
    return ActionSet(
        user,
        targets,
        tuple(merged[t][0] for t in targets),
        tuple(tuple(merged[t][1]) for t in targets),
    )


class _Operator:
    """Effective operator of one (graph, beta, similarity) triple.

    Shared by every view derived from it through action removal.
    """

    def __init__(self, g: HinGraph, beta: float, similarity: Mapping[int, Mapping[int, float]]):
        self.graph = g
        self.beta = beta
        self.similarity = similarity
        n = g.n_nodes
        rows, cols, vals = [], [], []
        self._action_mass: dict[int, dict[int, float]] = {}
        for v in range(n):
            entry: dict[int, float] = {}
            walk = {}
            for dst, kind, w in g.out_adj[v]:
                if kind == EdgeType.SIMILARITY:
                    continue
                walk[dst] = walk.get(dst, 0.0) + w
            total = sum(walk.values())
            share = {d: (beta * w / total if total > 0.0 else 0.0) for d, w in walk.items()}
            for dst, m in share.items():
                entry[dst] = entry.get(dst, 0.0) + m
            if walk:
                self._action_mass[v] = {d: m for d, m in share.items() if d != v}
            if beta < 1.0:
                srow = similarity.get(v)
                if srow is None:
                    entry[v] = entry.get(v, 0.0) + (1.0 - beta)
                else:
                    for dst, w in srow.items():
                        entry[dst] = entry.get(dst, 0.0) + (1.0 - beta) * w
            for dst in sorted(entry):
                if entry[dst] > 0.0:
                    rows.append(v)
                    cols.append(dst)
                    vals.append(entry[dst])
        self.matrix = sp.csr_matrix(
            (np.asarray(vals, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(n, n),
        )
        self.matrix.sort_indices()

    def action_mass(self, user: int) -> dict[int, float]:
        return self._action_mass.get(user, {})


def _row_entries(m: sp.csr_matrix, v: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = m.indptr[v], m.indptr[v + 1]
    return m.indices[lo:hi], m.data[lo:hi]


def _replace_row(m: sp.csr_matrix, v: int, cols: np.ndarray, vals: np.ndarray) -> sp.csr_matrix:
    lo, hi = m.indptr[v], m.indptr[v + 1]
    indices = np.concatenate([m.indices[:lo], cols.astype(m.indices.dtype), m.indices[hi:]])
    data = np.concatenate([m.data[:lo], vals, m.data[hi:]])
    indptr = m.indptr.copy()
    indptr[v + 1:] += len(cols) - (hi - lo)
    return sp.csr_matrix((data, indices, indptr), shape=m.shape)


@dataclass(frozen=True, eq=False)
class TransitionView:
    """Immutable walk operator over a graph, optionally with removed actions.

    ``removed`` is ``(user, frozenset(targets))`` or ``None``.
    """

    graph: HinGraph
    beta: float
    similarity: Mapping = field(repr=False)
    removed: tuple | None = None
    _op: _Operator = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Sub-stochastic effective operator ``P`` (CSR)."""
        if self.removed is None:
            return self._op.matrix
        user, targets = self.removed
        cols, vals = self._removed_row(user, targets)
        return _replace_row(self._op.matrix, user, cols, vals)

    def _removed_row(self, user: int, targets: frozenset) -> tuple[np.ndarray, np.ndarray]:
        cols, vals = _row_entries(self._op.matrix, user)
        mass = self._op.action_mass(user)
        vals = vals.copy()
        lost = 0.0
        for j, c in enumerate(cols):
            if c in targets:
                vals[j] -= mass[c]
                lost += mass[c]
        keep = vals > 1e-15
        cols, vals = cols[keep], vals[keep]
        denom = 1.0 - lost
        if denom <= 1e-14:
            return cols[:0], vals[:0]
        return cols.copy(), vals / denom

    @cached_property
    def missing(self) -> np.ndarray:
        """Per-row mass that the walk sends back to its seed (dangling mass)."""
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        miss = 1.0 - sums
        miss[np.abs(miss) < 1e-13] = 0.0
        return miss

    @property
    def has_dangling(self) -> bool:
        return bool(np.any(self.missing > 0.0))

    @cached_property
    def transpose(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()

    @cached_property
    def in_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSC arrays of ``P``: for column v, the rows w with ``P[w, v] > 0``."""
        csc = self.matrix.tocsc()
        csc.sort_indices()
        return (
            csc.indptr.astype(np.int64),
            csc.indices.astype(np.int64),
            csc.data.astype(np.float64),
        )

    def row(self, v: int) -> dict[int, float]:
        cols, vals = _row_entries(self.matrix, v)
        return {int(c): float(x) for c, x in zip(cols, vals)}

    def action_mass(self, user: int) -> dict[int, float]:
        """Transition mass on each surviving action edge of ``user``."""
        base = self._op.action_mass(user)
        if self.removed is None or self.removed[0] != user:
            return dict(base)
        targets = self.removed[1]
        lost = sum(base[t] for t in targets)
        denom = 1.0 - lost
        if denom <= 1e-14:
            return {}
        return {t: m / denom for t, m in base.items() if t not in targets}


def _similarity_from_graph(g: HinGraph) -> dict[int, dict[int, float]]:
    rows = {}
    for v, adj in enumerate(g.out_adj):
        sims = {e.node: e.weight for e in adj if e.type == EdgeType.SIMILARITY}
        total = sum(sims.values())
        if total > 0.0:
            rows[v] = {d: w / total for d, w in sorted(sims.items())}
    return rows


def make_transition_view(g: HinGraph, beta: float = 0.5, similarity=None) -> TransitionView:
    """Coupled operator ``beta * W + (1 - beta) * S``.

    ``similarity`` is ``None`` (rows built from the graph's similarity edges),
    ``"identity"``, or an explicit mapping ``node -> {node: probability}``.
    Nodes without a similarity row use the identity row, realized as a
    ``1 - beta`` self-loop.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if similarity is None:
        rows = _similarity_from_graph(g)
    elif isinstance(similarity, str):
        if similarity != "identity":
            raise ValueError(f"unknown similarity spec {similarity!r}")
        rows = {}
    else:
        rows = {}
        for v, srow in similarity.items():
            total = float(sum(srow.values()))
            if abs(total - 1.0) > 1e-9 or any(w < 0 for w in srow.values()):
                raise NonStochasticSimilarity(f"similarity row of node {v} sums to {total}")
            for d in srow:
                if g.node_types[d] != g.node_types[v]:
                    raise TypeConflict(f"similarity row of node {v} reaches node {d} of another type")
            rows[int(v)] = {int(d): float(w) for d, w in sorted(srow.items()) if w > 0}
    return TransitionView(g, float(beta), rows, None, _Operator(g, float(beta), rows))


def remove_actions_view(tv: TransitionView, user: int, removed: Iterable[int]) -> TransitionView:
    """View with ``user``'s actions to ``removed`` deleted and its row rescaled.

    Removals compose: applying this to a view that already removed actions of
    the same user yields the union relative to the unmodified operator.
    """
    removed = frozenset(int(t) for t in removed)
    mass = tv._op.action_mass(user)
    for t in removed:
        if t == user or t not in mass:
            raise NotAnAction(f"({user}, {t}) is not an action edge")
    if tv.removed is not None:
        prev_user, prev = tv.removed
        if prev_user != user:
            raise ValueError("a view may only remove actions of a single user")
        removed = removed | prev
    if not removed:
        return tv
    return TransitionView(tv.graph, tv.beta, tv.similarity, (user, removed), tv._op)
