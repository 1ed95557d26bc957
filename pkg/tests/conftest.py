import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hinexplain import NodeType, SynthParams, build_graph, generate_synth  # noqa: E402

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


def small_params(seed: int, **overrides) -> SynthParams:
    fields = dict(n_users=3, n_items=16, n_categories=3, n_reviews=5, actions_per_user=(2, 9),
                  follows_enabled=True, similarity_edge_rate=0.2, rng_seed=seed)
    fields.update(overrides)
    return SynthParams(**fields)


def small_hin(seed: int, **overrides):
    return generate_synth(small_params(seed, **overrides))


def random_hin(seed: int, n_users=3, n_items=8, n_cats=2, weighted=True, self_loops=False):
    """Arbitrary small typed graph: random ratings, optional weights, similarity
    edges between items, and possibly dangling nodes."""
    rng = np.random.default_rng(seed)
    nodes = ([(f"u{i}", "user") for i in range(n_users)] + [(f"i{i}", "item") for i in range(n_items)]
             + [(f"c{i}", "category") for i in range(n_cats)])
    edges = set()
    out = []

    def add(s, d, kind):
        if (s, d, kind) in edges:
            return
        edges.add((s, d, kind))
        w = float(rng.uniform(0.2, 3.0)) if weighted else 1.0
        out.append((s, d, kind, w))

    for u in range(n_users):
        for i in rng.choice(n_items, size=int(rng.integers(1, n_items // 2 + 1)), replace=False):
            add(f"u{u}", f"i{i}", "rated")
            if rng.random() < 0.8:
                add(f"i{i}", f"u{u}", "rated")
        if n_users > 1 and rng.random() < 0.4:
            v = int(rng.integers(n_users))
            if v != u:
                add(f"u{u}", f"u{v}", "follows")
        if self_loops and rng.random() < 0.3:
            add(f"u{u}", f"u{u}", "follows")
    for i in range(n_items):
        if rng.random() < 0.85:
            c = int(rng.integers(n_cats))
            add(f"i{i}", f"c{c}", "belongs-to")
            add(f"c{c}", f"i{i}", "belongs-to")
    for _ in range(n_items // 3):
        a, b = rng.choice(n_items, size=2, replace=False)
        add(f"i{a}", f"i{b}", "similarity")
    return build_graph(nodes, out)


def users_of(g):
    return g.nodes_of_type(NodeType.USER)


@pytest.fixture
def two_path():
    """u reaches i1 only through a and i2 only through b; a is weighted up so i1 is top."""
    nodes = [("u", "user"), ("a", "category"), ("b", "category"), ("i1", "item"), ("i2", "item")]
    edges = [("u", "a", "follows", 2.0), ("u", "b", "follows", 1.0),
             ("a", "i1", "belongs-to", 1.0), ("b", "i2", "belongs-to", 1.0),
             ("i1", "a", "belongs-to", 1.0), ("i2", "b", "belongs-to", 1.0)]
    return build_graph(nodes, edges)
