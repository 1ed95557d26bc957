"""Reference machinery: dense PPR solves and exhaustive subset search."""
from __future__ import annotations

import itertools
import time

import numpy as np

from .errors import NoActions, NoEligibleItems, NotAUser, TooManyActions
from .explain import ExplainConfig, ExplainMethod, Explanation, Status
from .graph import HinGraph, NodeType, TransitionView, make_transition_view, remove_actions_view, user_actions
from .ppr import Direction, Method, PprEstimate, eligible_items, order_desc, ppr_power

DENSE_LIMIT = 2000


def exact_ppr(view: TransitionView, seed: int, alpha: float = 0.15) -> PprEstimate:
    """Reference ``PPR(seed, .)``.

    Up to ``DENSE_LIMIT`` nodes this is an LU solve of
    ``x (I - (1 - alpha) P') = alpha e_s`` with one refinement step, where
    ``P'`` sends dangling mass to the seed; larger views fall back to power
    iteration at tol 1e-14.
    """
    n = view.n_nodes
    if n > DENSE_LIMIT:
        est = ppr_power(view, seed, alpha, tol=1e-14)
        return PprEstimate(est.scores, seed, Direction.FORWARD, Method.EXACT, 0.0, est.iterations)
    p = view.matrix.toarray()
    p[:, seed] += view.missing
    a = np.eye(n) - (1.0 - alpha) * p.T
    b = np.zeros(n)
    b[seed] = alpha
    x = np.linalg.solve(a, b)
    x += np.linalg.solve(a, b - a @ x)
    return PprEstimate(x, seed, Direction.FORWARD, Method.EXACT, 0.0, 0)


def _ranked(g: HinGraph, user: int, x: np.ndarray, tie_tol: float) -> list[int]:
    return order_desc(eligible_items(g, user), x, tie_tol)


def brute_force_explain(g: HinGraph, user: int, config: ExplainConfig | None = None,
                        max_actions: int = 15, *, similarity=None,
                        view: TransitionView | None = None) -> Explanation:
    """Enumerate action subsets by size, then lexicographically.

    The first subset after whose removal some candidate of the original
    top-k pool beats the original top item by more than ``tie_tol`` is a
    minimum explanation.  Every check is a dense solve on the modified view.
    """
    cfg = config or ExplainConfig()
    if g.node_types[user] != NodeType.USER:
        raise NotAUser(f"node {user!r} is not a user")
    if view is None:
        view = make_transition_view(g, cfg.beta, similarity)
    actions = user_actions(g, user).targets
    if not actions:
        raise NoActions(f"user {user} has no actions")
    if len(actions) > max_actions:
        raise TooManyActions(f"{len(actions)} actions exceed the guard of {max_actions}")

    t0 = time.perf_counter()
    ranked = _ranked(g, user, exact_ppr(view, user, cfg.alpha).scores, cfg.tie_tol)
    k = len(ranked) if cfg.scan_all else cfg.k
    if len(ranked[:k]) < 2:
        raise NoEligibleItems(f"user {user} has no replacement candidates (k={cfg.k})")
    rec, pool = ranked[0], ranked[1:k]

    evaluated = 0
    for size in range(len(actions)):
        for subset in itertools.combinations(actions, size):
            x = exact_ppr(remove_actions_view(view, user, subset), user, cfg.alpha).scores
            evaluated += 1
            if any(x[c] - x[rec] > cfg.tie_tol for c in pool):
                top = _ranked(g, user, x, cfg.tie_tol)[0]
                wall = (time.perf_counter() - t0) * 1e3
                return Explanation(user, rec, top, subset, Status.FOUND, ExplainMethod.ORACLE,
                                   len(actions), None, wall, {"evaluated": evaluated})
    wall = (time.perf_counter() - t0) * 1e3
    return Explanation(user, rec, None, (), Status.NO_COUNTERFACTUAL, ExplainMethod.ORACLE,
                       len(actions), None, wall, {"evaluated": evaluated})
