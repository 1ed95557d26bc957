"""Heuristic comparators that delete user actions one at a time.

Both stop as soon as some candidate of the original top-k pool outranks the
original top item (the same success test the optimal search and the oracle
use), and give up once only one action would be left to delete.
"""
from __future__ import annotations

import time
from collections import deque
from typing import Callable, Iterator

import numpy as np

from .errors import NoActions, NoEligibleItems
from .explain import ExplainConfig, ExplainMethod, Explanation, Status
from .graph import HinGraph, TransitionView, make_transition_view, remove_actions_view, user_actions
from .ppr import eligible_items, order_desc, ppr_column, ppr_power, top_k_items


def _setup(g: HinGraph, user: int, cfg: ExplainConfig, similarity, view):
    if view is None:
        view = make_transition_view(g, cfg.beta, similarity)
    actions = user_actions(g, user).targets
    if not actions:
        raise NoActions(f"user {user} has no actions")
    n_eligible = len(eligible_items(g, user))
    k = n_eligible if cfg.scan_all else cfg.k
    ranked = [i for i, _ in top_k_items(view, user, k, cfg.alpha, cfg.tol, cfg.tie_tol)] if n_eligible else []
    if len(ranked) < 2:
        raise NoEligibleItems(f"user {user} has no replacement candidates (k={cfg.k})")
    return view, actions, ranked


def _displaced(g: HinGraph, user: int, x: np.ndarray, rec: int, pool: list[int], tie_tol: float) -> int | None:
    """Top eligible item if some pool candidate now beats ``rec``, else None."""
    if any(x[c] - x[rec] > tie_tol for c in pool):
        return order_desc(eligible_items(g, user), x, tie_tol)[0]
    return None


class _Trajectory:
    """Deletion sequence of a baseline with the user's PPR after each step.

    The sequence does not depend on the candidate pool, so one trajectory
    serves every k; steps are produced lazily and cached together with the
    time each one took, so a cached replay still reports its real cost.
    """

    def __init__(self, view: TransitionView, user: int, actions, cfg: ExplainConfig,
                 next_deletion: Callable):
        self.view, self.user, self.actions, self.cfg = view, user, actions, cfg
        self._next = next_deletion
        self.steps: list[tuple[tuple, np.ndarray, float]] = []
        self._done = False
        self._current = view

    def __iter__(self) -> Iterator[tuple[tuple, np.ndarray, float]]:
        i = 0
        while True:
            if i < len(self.steps):
                yield self.steps[i]
                i += 1
                continue
            if self._done:
                return
            t0 = time.perf_counter()
            deleted = self.steps[-1][0] if self.steps else ()
            pick = None
            if len(deleted) < len(self.actions) - 1:
                pick = self._next(self._current, deleted)
            if pick is None:
                self._done = True
                return
            deleted = deleted + (pick,)
            self._current = remove_actions_view(self.view, self.user, deleted)
            x = ppr_power(self._current, self.user, self.cfg.alpha, self.cfg.tol).scores
            self.steps.append((deleted, x, (time.perf_counter() - t0) * 1e3))


def _stop(g, user, cfg, method, trajectory: _Trajectory, ranked: list[int]) -> Explanation:
    rec, pool = ranked[0], ranked[1:]
    deleted: tuple = ()
    wall = 0.0
    for deleted, x, step_ms in trajectory:
        wall += step_ms
        top = _displaced(g, user, x, rec, pool, cfg.tie_tol)
        if top is not None:
            return Explanation(user, rec, top, deleted, Status.FOUND, method, len(trajectory.actions),
                               None, wall, {"order": list(deleted)})
    return Explanation(user, rec, None, (), Status.NO_COUNTERFACTUAL, method, len(trajectory.actions),
                       None, wall, {"order": list(deleted)})


def _hc_trajectory(view, user, actions, rec, cfg, recompute=True) -> _Trajectory:
    def contributions(current: TransitionView, deleted) -> dict:
        column = ppr_column(current, rec, cfg.alpha, cfg.tol)
        mass = current.action_mass(user)
        return {n: mass[n] * column[n] for n in actions if n not in deleted}

    frozen = None if recompute else contributions(view, ())

    def next_deletion(current, deleted):
        if recompute:
            scores = contributions(current, deleted)
        else:
            scores = {n: s for n, s in frozen.items() if n not in deleted}
        if not scores:
            return None
        return order_desc(sorted(scores), scores)[0]

    return _Trajectory(view, user, actions, cfg, next_deletion)


def explain_hc(g: HinGraph, user: int, config: ExplainConfig | None = None, *, similarity=None,
               view: TransitionView | None = None, recompute: bool = True) -> Explanation:
    """Highest contributions: delete the action maximizing ``W(u, n) * PPR(n, rec)``.

    Contributions are recomputed on the current view after each deletion;
    ``recompute=False`` keeps the order from the unmodified view.
    """
    cfg = config or ExplainConfig()
    view, actions, ranked = _setup(g, user, cfg, similarity, view)
    trajectory = _hc_trajectory(view, user, actions, ranked[0], cfg, recompute)
    return _stop(g, user, cfg, ExplainMethod.HC, trajectory, ranked)


def _hops_to(g: HinGraph, target: int, blocked: int) -> dict[int, int]:
    """Directed hop distance to ``target`` from every node, never passing ``blocked``."""
    dist = {target: 0}
    queue = deque([target])
    while queue:
        v = queue.popleft()
        for e in g.in_adj[v]:
            w = e.node
            if w == blocked or w in dist:
                continue
            dist[w] = dist[v] + 1
            queue.append(w)
    return dist


def _sp_trajectory(g, view, user, actions, rec, cfg) -> _Trajectory:
    dist = _hops_to(g, rec, user)

    def next_deletion(current, deleted):
        options = [(dist[n], n) for n in actions if n not in deleted and n in dist]
        return min(options)[1] if options else None

    return _Trajectory(view, user, actions, cfg, next_deletion)


def explain_sp(g: HinGraph, user: int, config: ExplainConfig | None = None, *, similarity=None,
               view: TransitionView | None = None) -> Explanation:
    """Shortest paths: delete the first edge of a shortest ``u -> rec`` path.

    Paths use graph edges only (hop count); among equally short paths the one
    leaving through the smallest node id wins.  A shortest path never
    revisits ``u``, so its tail is searched with ``u`` blocked, and deleting
    the user's own edges never changes it.
    """
    cfg = config or ExplainConfig()
    view, actions, ranked = _setup(g, user, cfg, similarity, view)
    trajectory = _sp_trajectory(g, view, user, actions, ranked[0], cfg)
    return _stop(g, user, cfg, ExplainMethod.SP, trajectory, ranked)


def baseline_sweep(g: HinGraph, user: int, method: str, ks, config: ExplainConfig | None = None, *,
                   similarity=None, view: TransitionView | None = None) -> dict[int, Explanation]:
    """One baseline for several pool sizes, sharing a single deletion trajectory."""
    cfg = config or ExplainConfig()
    ks = sorted(set(ks))
    widest = ExplainConfig(**{**cfg.__dict__, "k": max(ks)})
    view, actions, ranked = _setup(g, user, widest, similarity, view)
    if method == "hc":
        trajectory = _hc_trajectory(view, user, actions, ranked[0], cfg)
        kind = ExplainMethod.HC
    elif method == "sp":
        trajectory = _sp_trajectory(g, view, user, actions, ranked[0], cfg)
        kind = ExplainMethod.SP
    else:
        raise ValueError(f"unknown baseline {method!r}")
    out = {}
    for k in ks:
        if len(ranked[:k]) < 2:
            raise NoEligibleItems(f"user {user} has no replacement candidates (k={k})")
        out[k] = _stop(g, user, cfg, kind, trajectory, ranked[:k])
    return out
