import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_hin, small_hin
from oracles import brute_force_size, column, dense_operator, solve_ppr
from hinexplain import (
    ExplainConfig,
    ScoreMode,
    Status,
    build_graph,
    compute_scores,
    contribution_diffs,
    decompose_ppr,
    explain,
    greedy_swap,
    make_transition_view,
    ppr_power,
    swap_order,
    top_k_items,
    user_actions,
    verify_counterfactual,
)
from hinexplain.errors import CandidateIsNeighbor, NoActions, NoEligibleItems
from hinexplain.explain import ContributionDiff, ScoreTable

ALPHA = 0.15


def exact_scores(g, beta, user, targets):
    """``PPR(n, t | G\\A)`` from a dense solve on the stripped reference operator."""
    p = dense_operator(g, beta, [t for t in user_actions(g, user).targets], user)
    return ScoreTable(user, {t: column(p, t, ALPHA) for t in targets}, ScoreMode.PRECOMPUTED)


def diffs(*values):
    return [ContributionDiff(i, v) for i, v in enumerate(values)]


def test_greedy_caption_values():
    chosen, remaining = greedy_swap(diffs(0.095, -0.022))
    assert chosen == (0,)
    assert remaining == pytest.approx(-0.022)


def test_greedy_already_swapped():
    chosen, remaining = greedy_swap(diffs(-0.01, -0.02))
    assert chosen == () and remaining < 0


def test_greedy_all_positive_is_no_swap():
    chosen, remaining = greedy_swap(diffs(0.3, 0.2, 0.1))
    assert chosen is None and remaining == pytest.approx(0.0)


def test_greedy_full_set_is_no_swap():
    # Only removing both entries would go negative, and that is not a strict subset.
    chosen, _ = greedy_swap(diffs(0.2, 0.1), fixed=-0.25)
    assert chosen == (0,)
    chosen, _ = greedy_swap(diffs(0.2, 0.1), fixed=-0.05)
    assert chosen is None


def test_greedy_margin():
    assert greedy_swap(diffs(0.1, -1e-9), margin=1e-8)[0] is None
    assert greedy_swap(diffs(0.1, -1e-7), margin=1e-8)[0] == (0,)


def test_two_path_explanation(two_path):
    g = two_path
    result = explain(g, 0, ExplainConfig(beta=1.0))
    assert result.found
    assert result.actions == (g.index("a"),)
    assert result.original_rec == g.index("i1")
    assert result.replacement == g.index("i2")


def test_two_path_diffs_and_swap(two_path):
    g = two_path
    view = make_transition_view(g, 1.0)
    rec, other = g.index("i1"), g.index("i2")
    scores = exact_scores(g, 1.0, 0, [rec, other])
    d = contribution_diffs(view, 0, rec, other, scores)
    assert [x.neighbor for x in d] == [g.index("a"), g.index("b")]
    assert d[0].diff > 0 > d[1].diff
    assert swap_order(view, 0, rec, other, scores) == (g.index("a"),)
    assert swap_order(view, 0, other, rec, scores) == ()


def test_symmetric_neighbours_give_zero_diffs():
    nodes = [("u", "user"), ("a", "category"), ("b", "category"), ("x", "item"), ("y", "item")]
    edges = [("u", "a", "follows", 1.0), ("u", "b", "follows", 1.0)]
    edges += [(c, i, "belongs-to", 1.0) for c in "ab" for i in "xy"]
    g = build_graph(nodes, edges)
    view = make_transition_view(g, 0.5)
    scores = exact_scores(g, 0.5, 0, [g.index("x"), g.index("y")])
    d = contribution_diffs(view, 0, g.index("x"), g.index("y"), scores)
    assert all(abs(x.diff) < 1e-15 for x in d)
    assert [x.neighbor for x in d] == [g.index("a"), g.index("b")]
    # An exact tie has no explanation within the pool.
    assert explain(g, 0, ExplainConfig()).status == Status.NO_COUNTERFACTUAL


def test_candidate_checks(two_path):
    g = two_path
    view = make_transition_view(g, 1.0)
    scores = exact_scores(g, 1.0, 0, [g.index("i1"), g.index("i2")])
    with pytest.raises(CandidateIsNeighbor):
        contribution_diffs(view, 0, g.index("a"), g.index("i2"), scores)
    with pytest.raises(ValueError):
        contribution_diffs(view, 0, g.index("i1"), g.index("i1"), scores)
    with pytest.raises(CandidateIsNeighbor):
        decompose_ppr(view, 0, g.index("b"), [])


def test_explain_errors(two_path):
    with pytest.raises(NoEligibleItems):
        explain(two_path, 0, ExplainConfig(k=1))
    g = build_graph([("u", "user"), ("i", "item")], [("i", "u", "rated", 1.0)])
    with pytest.raises(NoActions):
        explain(g, 0)
    with pytest.raises(ValueError):
        ExplainConfig(alpha=1.0)
    with pytest.raises(ValueError):
        ExplainConfig(k=0)


def test_verify_examples(two_path):
    g = two_path
    view = make_transition_view(g, 1.0)
    rec, other = g.index("i1"), g.index("i2")
    check = verify_counterfactual(view, 0, rec, other, [])
    assert not check.ok and check.rec_score > check.replacement_score
    check = verify_counterfactual(view, 0, rec, other, [g.index("a")])
    assert check.ok and check.replacement_score > check.rec_score


def test_frozen_two_path_scores(two_path):
    # Dense-solve values for the fixture, frozen (289/1110 and half of it).
    view = make_transition_view(two_path, 1.0)
    top = top_k_items(view, 0, 2, ALPHA)
    assert top[0][1] == pytest.approx(0.260360360360, abs=1e-11)
    assert top[1][1] == pytest.approx(0.130180180180, abs=1e-11)


def test_frozen_small_corpus_instance():
    g = small_hin(11)
    # Size and status agree with the dense brute force; the sets are frozen.
    result = explain(g, g.index("u2"), ExplainConfig())
    assert (result.status, result.size) == (Status.FOUND, 1)
    assert [g.name(a) for a in result.actions] == ["i14"]
    assert (g.name(result.original_rec), g.name(result.replacement)) == ("i3", "i8")
    result = explain(g, g.index("u0"), ExplainConfig())
    assert [g.name(a) for a in result.actions] == ["i2", "i7"]


def test_decomposition_edges(two_path):
    g = two_path
    view = make_transition_view(g, 0.5)
    rec = g.index("i1")
    everything = user_actions(g, 0).targets
    d = decompose_ppr(view, 0, rec, everything)
    assert d.aggregation == 0.0 and d.product == 0.0
    d = decompose_ppr(view, 0, rec, [])
    assert d.product == pytest.approx(ppr_power(view, 0, ALPHA, 1e-14).scores[rec], abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([0.0, 0.5, 1.0]), data=st.data())
def test_decomposition_property(seed, beta, data):
    g = random_hin(seed)
    view = make_transition_view(g, beta)
    u = data.draw(st.sampled_from(g.nodes_of_type("user")))
    acts = list(user_actions(g, u).targets)
    taken = set(g.out_neighbors(u))
    items = [i for i in g.nodes_of_type("item") if i not in taken]
    if not items:
        return
    rec = data.draw(st.sampled_from(items))
    subset = data.draw(st.lists(st.sampled_from(acts), unique=True, max_size=len(acts) - 1))
    d = decompose_ppr(view, u, rec, subset)
    direct = solve_ppr(dense_operator(g, beta, subset, u), u, ALPHA)[rec]
    assert d.product == pytest.approx(direct, rel=1e-8, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([0.0, 0.5, 1.0]), data=st.data())
def test_sign_equivalence(seed, beta, data):
    g = random_hin(seed)
    view = make_transition_view(g, beta)
    u = data.draw(st.sampled_from(g.nodes_of_type("user")))
    taken = set(g.out_neighbors(u))
    items = [i for i in g.nodes_of_type("item") if i not in taken]
    if len(items) < 2:
        return
    rec, other = data.draw(st.lists(st.sampled_from(items), unique=True, min_size=2, max_size=2))
    acts = list(user_actions(g, u).targets)
    subset = data.draw(st.lists(st.sampled_from(acts), unique=True, max_size=len(acts) - 1))
    scores = exact_scores(g, beta, u, [rec, other])
    mass = view.action_mass(u)
    summed = sum(mass[n] * (scores[rec][n] - scores[other][n]) for n in acts if n not in subset)
    x = solve_ppr(dense_operator(g, beta, subset, u), u, ALPHA)
    delta = x[rec] - x[other]
    if abs(delta) > 1e-10:
        assert np.sign(summed) == np.sign(delta)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([0.5, 1.0]), data=st.data())
def test_greedy_prefix_dominance(seed, beta, data):
    g = random_hin(seed, n_items=10)
    view = make_transition_view(g, beta)
    u = data.draw(st.sampled_from(g.nodes_of_type("user")))
    taken = set(g.out_neighbors(u))
    items = [i for i in g.nodes_of_type("item") if i not in taken]
    if len(items) < 2:
        return
    rec, other = data.draw(st.lists(st.sampled_from(items), unique=True, min_size=2, max_size=2))
    scores = exact_scores(g, beta, u, [rec, other])
    chosen = swap_order(view, u, rec, other, scores)
    acts = list(user_actions(g, u).targets)
    limit = len(acts) if chosen is None else len(chosen)
    for size in range(limit):
        for subset in itertools.combinations(acts, size):
            x = solve_ppr(dense_operator(g, beta, subset, u), u, ALPHA)
            assert x[other] - x[rec] <= 1e-12
    if chosen is not None:
        x = solve_ppr(dense_operator(g, beta, chosen, u), u, ALPHA)
        assert x[other] > x[rec]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([0.5, 1.0]))
def test_matches_reference_brute_force(seed, beta):
    g = small_hin(seed % 10_000)
    for u in g.nodes_of_type("user")[:2]:
        try:
            result = explain(g, u, ExplainConfig(beta=beta))
        except NoEligibleItems:
            continue
        ref = brute_force_size(g, u, beta)
        assert (result.size if result.found else None) == ref


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([0.0, 0.5, 1.0]))
def test_found_explanations_verify_and_are_strict(seed, beta):
    g = small_hin(seed % 10_000, n_items=24)
    view = make_transition_view(g, beta)
    cfg = ExplainConfig(beta=beta)
    for u in g.nodes_of_type("user"):
        try:
            result = explain(g, u, cfg, view=view)
        except NoEligibleItems:
            continue
        if result.found:
            assert result.size < result.n_actions
            assert verify_counterfactual(view, u, result.original_rec, result.replacement,
                                         result.actions, ALPHA, cfg.tie_tol).ok
        else:
            assert result.replacement is None and result.actions == ()


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_k_monotonicity_and_call_bound(seed):
    g = small_hin(seed % 10_000, n_items=24, actions_per_user=(2, 12))
    view = make_transition_view(g, 0.5)
    for u in g.nodes_of_type("user"):
        costs = []
        for k in range(2, 9):
            try:
                result = explain(g, u, ExplainConfig(k=k), view=view)
            except NoEligibleItems:
                break
            assert result.diagnostics["swap_calls"] <= k - 1
            costs.append(result.cost)
        assert costs == sorted(costs, reverse=True)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([0.0, 0.5, 1.0]))
def test_mode_parity(seed, beta):
    g = small_hin(seed % 10_000, n_items=24)
    view = make_transition_view(g, beta)
    for u in g.nodes_of_type("user"):
        try:
            a = explain(g, u, ExplainConfig(beta=beta), view=view)
        except NoEligibleItems:
            continue
        b = explain(g, u, ExplainConfig(beta=beta, score_mode="dynamic"), view=view)
        assert (a.status, a.actions, a.replacement) == (b.status, b.actions, b.replacement)
        assert a.score_mode == ScoreMode.PRECOMPUTED and b.score_mode == ScoreMode.DYNAMIC


def test_scan_all_never_worse():
    for seed in range(15):
        g = small_hin(seed)
        for u in g.nodes_of_type("user"):
            try:
                pooled = explain(g, u, ExplainConfig(k=3))
            except NoEligibleItems:
                continue
            wide = explain(g, u, ExplainConfig(k=3, scan_all=True))
            assert wide.cost <= pooled.cost


def test_precomputed_scores_are_reused():
    g = small_hin(4)
    view = make_transition_view(g, 0.5)
    ranked = [i for i, _ in top_k_items(view, 0, 5)]
    table = compute_scores(view, 0, ranked)
    result = explain(g, 0, ExplainConfig(), view=view, scores=table)
    assert result.diagnostics["precompute_ms"] == table.elapsed_ms
    fresh = explain(g, 0, ExplainConfig(), view=view)
    assert (result.actions, result.replacement) == (fresh.actions, fresh.replacement)


def test_stripped_view_scores_both_modes():
    g = small_hin(6)
    view = make_transition_view(g, 0.5)
    targets = [i for i, _ in top_k_items(view, 0, 4)]
    ref = exact_scores(g, 0.5, 0, targets)
    for mode in ScoreMode:
        table = compute_scores(view, 0, targets, ALPHA, 1e-8, mode)
        for t in targets:
            assert np.abs(table[t] - ref[t]).max() <= 1e-8


def test_fixed_user_similarity_term():
    # The user's similarity mass to another user is never removable.
    nodes = [("u", "user"), ("w", "user"), ("a", "category"), ("b", "category"), ("x", "item"), ("y", "item")]
    edges = [("u", "a", "follows", 1.0), ("u", "b", "follows", 1.0), ("w", "b", "follows", 1.0),
             ("a", "x", "belongs-to", 1.0), ("b", "y", "belongs-to", 1.0), ("b", "x", "belongs-to", 1.0),
             ("u", "w", "similarity", 1.0)]
    g = build_graph(nodes, edges)
    for beta in (0.3, 0.7):
        result = explain(g, 0, ExplainConfig(beta=beta))
        ref = brute_force_size(g, 0, beta)
        assert (result.size if result.found else None) == ref
