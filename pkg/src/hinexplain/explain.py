"""Minimum counterfactual explanations over a user's own actions.

Let ``A`` be the user's actions and write ``G\\A`` for the view with all of
them removed.  For a subset ``R`` of ``A`` and items ``i`` not adjacent to
the user,

    PPR(u, i | R) = PPR(u, u | R) * (1 - a) / a * sum_{n in A \\ R} W(u, n | R) * PPR(n, i | G\\A)

and the surviving weights ``W(u, n | R)`` are the original ones times a
common factor.  So whether ``c`` outranks ``rec`` after removing ``R``
depends only on the sign of

    sum_{n in A \\ R} W(u, n) * (PPR(n, rec | G\\A) - PPR(n, c | G\\A)),

whose summands do not depend on ``R``.  Dropping the largest summands first
therefore reaches a negative sum with the fewest removals.

Mass the user row puts on nodes other than its actions (similarity rows of
user nodes) cannot be removed; it enters every sum as a fixed term.  The
user's own self-mass contributes nothing because walks in ``G\\A`` never
leave ``u``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    CandidateIsNeighbor,
    NoActions,
    NoEligibleItems,
    VerificationFailed,
)
from .graph import HinGraph, TransitionView, make_transition_view, remove_actions_view, user_actions
from .ppr import (
    eligible_items,
    order_desc,
    ppr_column,
    ppr_power,
    ppr_reverse_push,
    push_update_remove_actions,
    top_k_items,
)


class Status(str, Enum):
    FOUND = "found"
    NO_COUNTERFACTUAL = "no_counterfactual"


class ExplainMethod(str, Enum):
    PRINCE = "prince"
    HC = "hc"
    SP = "sp"
    ORACLE = "oracle"


class ScoreMode(str, Enum):
    PRECOMPUTED = "precomputed"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class ExplainConfig:
    alpha: float = 0.15
    beta: float = 0.5
    k: int = 5
    epsilon: float = 1e-8
    tie_tol: float = 1e-10
    score_mode: ScoreMode = ScoreMode.PRECOMPUTED
    # Consider every eligible item as a replacement instead of the top-k pool.
    scan_all: bool = False
    tol: float = 1e-12
    verify: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.tie_tol < 0.0 or self.epsilon <= 0.0:
            raise ValueError("tie_tol must be >= 0 and epsilon > 0")
        object.__setattr__(self, "score_mode", ScoreMode(self.score_mode))

    @property
    def margin(self) -> float:
        """Threshold a contribution sum must fall below to count as a swap.

        Covers the tie tolerance (a unit of sum is worth at least 1 - alpha
        units of PPR) and the 2 * epsilon error of two pushed scores.
        """
        return self.tie_tol / (1.0 - self.alpha) + 2.0 * self.epsilon


@dataclass(frozen=True)
class ContributionDiff:
    neighbor: int
    diff: float


@dataclass
class Explanation:
    user: int
    original_rec: int
    replacement: int | None
    actions: tuple
    status: Status
    method: ExplainMethod
    n_actions: int
    score_mode: ScoreMode | None = None
    wall_time_ms: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.actions)

    @property
    def found(self) -> bool:
        return self.status == Status.FOUND

    @property
    def cost(self) -> int:
        """Explanation size, counting a failure as removing every action."""
        return self.size if self.found else self.n_actions


@dataclass(frozen=True)
class ScoreTable:
    """``PPR(n, t | G\\A)`` for each target ``t`` as a dense vector over n."""

    user: int
    values: Mapping[int, np.ndarray]
    mode: ScoreMode
    elapsed_ms: float = 0.0

    def __getitem__(self, target: int) -> np.ndarray:
        return self.values[target]

    def __contains__(self, target: int) -> bool:
        return target in self.values


def compute_scores(view: TransitionView, user: int, targets: Iterable[int], alpha: float = 0.15,
                   epsilon: float = 1e-8, mode: ScoreMode = ScoreMode.PRECOMPUTED) -> ScoreTable:
    """Reverse-push scores of every target on the all-actions-removed view.

    ``PRECOMPUTED`` pushes directly on ``G\\A``; ``DYNAMIC`` pushes on the
    unmodified view and carries each state over with the deletion update.
    """
    t0 = time.perf_counter()
    actions = user_actions(view.graph, user).targets
    mode = ScoreMode(mode)
    values = {}
    if mode == ScoreMode.PRECOMPUTED:
        stripped = remove_actions_view(view, user, actions)
        for t in targets:
            values[t] = ppr_reverse_push(stripped, t, alpha, epsilon).estimates
    else:
        for t in targets:
            state = ppr_reverse_push(view, t, alpha, epsilon)
            values[t] = push_update_remove_actions(state, user, actions).estimates
    return ScoreTable(user, values, mode, (time.perf_counter() - t0) * 1e3)


def _check_pair(g: HinGraph, user: int, rec: int, rec_star: int | None = None) -> None:
    taken = set(g.out_neighbors(user))
    for item in (rec, rec_star):
        if item is not None and (item in taken or item == user):
            raise CandidateIsNeighbor(f"item {item} is an out-neighbor of user {user}")
    if rec_star is not None and rec == rec_star:
        raise ValueError("rec and rec_star must differ")


def _user_terms(view: TransitionView, user: int) -> tuple[dict, dict]:
    """Split the user's row into action mass and fixed (non-removable) mass."""
    mass = view.action_mass(user)
    fixed = {}
    for v, w in view.row(user).items():
        if v == user:
            continue
        rest = w - mass.get(v, 0.0)
        if rest > 1e-15:
            fixed[v] = rest
    return mass, fixed


def contribution_diffs(view: TransitionView, user: int, rec: int, rec_star: int, scores,
                       tie_tol: float = 0.0) -> list[ContributionDiff]:
    """``W(u, n) * (PPR(n, rec | G\\A) - PPR(n, rec_star | G\\A))`` per action,
    sorted descending; entries within ``tie_tol`` are ordered by node id."""
    _check_pair(view.graph, user, rec, rec_star)
    mass, _ = _user_terms(view, user)
    a, b = scores[rec], scores[rec_star]
    raw = {n: m * (a[n] - b[n]) for n, m in mass.items()}
    return [ContributionDiff(n, float(raw[n])) for n in order_desc(sorted(raw), raw, tie_tol)]


def fixed_contribution(view: TransitionView, user: int, rec: int, rec_star: int, scores) -> float:
    _, fixed = _user_terms(view, user)
    a, b = scores[rec], scores[rec_star]
    return float(sum(w * (a[v] - b[v]) for v, w in fixed.items()))


def greedy_swap(diffs: list[ContributionDiff], fixed: float = 0.0,
                margin: float = 0.0) -> tuple[tuple | None, float]:
    """Shortest prefix of descending ``diffs`` whose removal drives the sum below ``-margin``.

    Returns ``(prefix, remaining_sum)``; the prefix is ``None`` when no strict
    subset of the actions works.
    """
    total = fixed + sum(d.diff for d in diffs)
    chosen = []
    for d in diffs:
        if total < -margin or d.diff <= 0.0:
            break
        total -= d.diff
        chosen.append(d.neighbor)
    if total < -margin and len(chosen) < len(diffs):
        return tuple(chosen), total
    return None, total


def swap_order(view: TransitionView, user: int, rec: int, rec_star: int, scores,
               margin: float = 0.0) -> tuple | None:
    """Fewest actions whose removal lets ``rec_star`` outrank ``rec``.

    ``()`` if it already does; ``None`` if no strict subset of the actions
    achieves it.
    """
    diffs = contribution_diffs(view, user, rec, rec_star, scores, margin)
    chosen, _ = greedy_swap(diffs, fixed_contribution(view, user, rec, rec_star, scores), margin)
    return chosen


def _aggregate(mass: dict, fixed: dict, removed: Iterable[int], column: np.ndarray) -> float:
    """Score proportional to ``PPR(u, item | removed)``, shared factor dropped."""
    removed = set(removed)
    total = sum(m * column[n] for n, m in mass.items() if n not in removed)
    return float(total + sum(w * column[v] for v, w in fixed.items()))


@dataclass(frozen=True)
class Verification:
    ok: bool
    rec_score: float
    replacement_score: float
    top: int


def verify_counterfactual(view: TransitionView, user: int, rec: int, rec_star: int,
                          subset: Iterable[int], alpha: float = 0.15, tie_tol: float = 1e-10,
                          tol: float = 1e-12) -> Verification:
    """Recompute ``PPR(u, .)`` without ``subset`` and check that ``rec_star``
    beats ``rec`` by more than ``tie_tol`` and is the top eligible item."""
    modified = remove_actions_view(view, user, subset)
    x = ppr_power(modified, user, alpha, tol).scores
    ranked = order_desc(eligible_items(view.graph, user), x, tie_tol)
    ok = bool(x[rec_star] - x[rec] > tie_tol and ranked[0] == rec_star)
    return Verification(ok, float(x[rec]), float(x[rec_star]), ranked[0])


@dataclass(frozen=True)
class Decomposition:
    ppr_uu: float
    aggregation: float
    product: float


def decompose_ppr(view: TransitionView, user: int, rec: int, subset: Iterable[int],
                  alpha: float = 0.15, tol: float = 1e-14) -> Decomposition:
    """``PPR(u, rec | subset)`` as ``PPR(u, u | subset)`` times an aggregate of
    ``PPR(n, rec | G\\A)`` over the surviving neighbors."""
    _check_pair(view.graph, user, rec)
    actions = user_actions(view.graph, user).targets
    stripped = remove_actions_view(view, user, actions)
    column = ppr_column(stripped, rec, alpha, tol, normalize=False)
    modified = remove_actions_view(view, user, subset)
    ppr_uu = float(ppr_power(modified, user, alpha, tol).scores[user])
    walk = sum(w * column[v] for v, w in modified.row(user).items() if v != user)
    aggregation = (1.0 - alpha) / alpha * float(walk)
    return Decomposition(ppr_uu, aggregation, ppr_uu * aggregation)


def explain(g: HinGraph, user: int, config: ExplainConfig | None = None, *, similarity=None,
            view: TransitionView | None = None, scores: ScoreTable | None = None) -> Explanation:
    """Minimum set of the user's actions whose removal replaces the top item.

    The replacement is drawn from ranks 2..k of the original ranking (or
    from every eligible item with ``scan_all``).  ``wall_time_ms`` covers the
    search itself plus, in dynamic mode, deriving the scores.
    """
    cfg = config or ExplainConfig()
    if view is None:
        view = make_transition_view(g, cfg.beta, similarity)
    actions = user_actions(g, user)
    if not actions.targets:
        raise NoActions(f"user {user} has no actions")

    t0 = time.perf_counter()
    eligible = len(eligible_items(g, user))
    ranked = top_k_items(view, user, eligible if cfg.scan_all else cfg.k, cfg.alpha, cfg.tol, cfg.tie_tol) \
        if eligible else []
    ranking_ms = (time.perf_counter() - t0) * 1e3
    if len(ranked) < 2:
        raise NoEligibleItems(f"user {user} has no replacement candidates (k={cfg.k})")
    rec = ranked[0][0]
    pool = [i for i, _ in ranked[1:]]
    targets = [rec] + pool

    precompute_ms = 0.0
    if cfg.score_mode == ScoreMode.PRECOMPUTED:
        if scores is None or any(t not in scores for t in targets):
            scores = compute_scores(view, user, targets, cfg.alpha, cfg.epsilon, ScoreMode.PRECOMPUTED)
        precompute_ms = scores.elapsed_ms

    t0 = time.perf_counter()
    if cfg.score_mode == ScoreMode.DYNAMIC:
        scores = compute_scores(view, user, targets, cfg.alpha, cfg.epsilon, ScoreMode.DYNAMIC)
    margin = cfg.margin
    mass, fixed = _user_terms(view, user)
    best, best_item = None, rec
    candidates = []
    for rank, c in enumerate(pool, start=2):
        diffs = contribution_diffs(view, user, rec, c, scores, margin)
        base = fixed_contribution(view, user, rec, c, scores)
        chosen, remaining = greedy_swap(diffs, base, margin)
        candidates.append({
            "item": c,
            "rank": rank,
            "swap_size": None if chosen is None else len(chosen),
            "initial_sum": base + sum(d.diff for d in diffs),
            "final_sum": remaining,
        })
        if chosen is None:
            continue
        if best is None or len(chosen) < len(best):
            best, best_item = chosen, c
        elif len(chosen) == len(best):
            ours = _aggregate(mass, fixed, chosen, scores[c])
            theirs = _aggregate(mass, fixed, chosen, scores[best_item])
            if ours - theirs > margin:
                best, best_item = chosen, c
    replacement = None
    if best is not None:
        # Report the pool item that actually tops the others once `best` is gone.
        agg = {c: _aggregate(mass, fixed, best, scores[c]) for c in pool}
        replacement = order_desc(pool, agg, margin)[0]
    wall_ms = (time.perf_counter() - t0) * 1e3

    diagnostics = {
        "candidates": candidates,
        "swap_calls": len(candidates),
        "ranking_ms": ranking_ms,
        "precompute_ms": precompute_ms,
        "pool_choice": best_item if best is not None else None,
    }
    result = Explanation(user, rec, replacement, tuple(sorted(best)) if best else (),
                         Status.FOUND if best is not None else Status.NO_COUNTERFACTUAL,
                         ExplainMethod.PRINCE, len(actions), cfg.score_mode, wall_ms, diagnostics)
    if best is not None and cfg.verify:
        _confirm(view, result, cfg)
    return result


def _confirm(view: TransitionView, result: Explanation, cfg: ExplainConfig) -> None:
    """Check a found explanation by full recomputation, fixing the reported
    replacement if an item outside the candidate pool ends up on top."""
    t0 = time.perf_counter()
    check = verify_counterfactual(view, result.user, result.original_rec, result.replacement,
                                  result.actions, cfg.alpha, cfg.tie_tol, cfg.tol)
    if not check.ok and check.top != result.original_rec:
        result.diagnostics["replacement_adjusted"] = True
        result.replacement = check.top
        check = verify_counterfactual(view, result.user, result.original_rec, check.top,
                                      result.actions, cfg.alpha, cfg.tie_tol, cfg.tol)
    result.diagnostics["verify_ms"] = (time.perf_counter() - t0) * 1e3
    result.diagnostics["verified_scores"] = (check.rec_score, check.replacement_score)
    if not check.ok:
        raise VerificationFailed(
            f"removing {result.actions} leaves item {check.top} on top for user {result.user}")
