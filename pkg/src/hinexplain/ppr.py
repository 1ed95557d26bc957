"""Personalized PageRank on a :class:`~hinexplain.graph.TransitionView`.

Forward scores ``PPR(s, .)`` come from power iteration; scores of one target
from every source, ``PPR(., t)``, come from reverse local push or from the
column fixed point.  Reverse push runs on the raw sub-stochastic operator, in
which a walk reaching a dangling row simply dies; on views without dangling
mass (any view with ``beta < 1``) that equals the walk's PPR.  Views with
dangling mass are renormalized when converted to a :class:`PprEstimate`.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import NoConvergence, NotAUser
from .graph import NodeType, TransitionView, remove_actions_view


class Direction(str, Enum):
    FORWARD = "forward"
    REVERSE = "reverse"


class Method(str, Enum):
    POWER_ITERATION = "power-iteration"
    REVERSE_PUSH = "reverse-push"
    EXACT = "exact"


@dataclass(frozen=True)
class PprEstimate:
    """Scores of a forward run (seed fixed) or a reverse run (target fixed)."""

    scores: np.ndarray
    node: int
    direction: Direction
    method: Method
    epsilon: float
    iterations: int = 0

    def __getitem__(self, v: int) -> float:
        return float(self.scores[v])


def ppr_power(view: TransitionView, seed: int, alpha: float = 0.15, tol: float = 1e-12,
              max_iters: int = 100_000) -> PprEstimate:
    """Iterate ``x <- alpha e_s + (1 - alpha) x P`` until the L1 change is <= tol.

    Dangling mass returns to ``seed``, so the iterate stays a distribution.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    pt = view.transpose
    missing = view.missing
    x = np.zeros(view.n_nodes)
    x[seed] = 1.0
    for it in range(1, max_iters + 1):
        nxt = (1.0 - alpha) * (pt @ x)
        nxt[seed] += alpha + (1.0 - alpha) * float(missing @ x)
        delta = float(np.abs(nxt - x).sum())
        x = nxt
        if delta <= tol:
            return PprEstimate(x, seed, Direction.FORWARD, Method.POWER_ITERATION, 0.0, it)
    raise NoConvergence(f"no convergence after {max_iters} iterations (last change {delta:.3g})")


def _column_fixed_point(view: TransitionView, rhs: np.ndarray, alpha: float, tol: float,
                        max_iters: int) -> np.ndarray:
    p = view.matrix
    x = alpha * rhs
    for _ in range(max_iters):
        nxt = alpha * rhs + (1.0 - alpha) * (p @ x)
        delta = float(np.abs(nxt - x).max())
        x = nxt
        if delta <= tol:
            return x
    raise NoConvergence(f"column iteration did not converge after {max_iters} iterations")


def ppr_column(view: TransitionView, target: int, alpha: float = 0.15, tol: float = 1e-14,
               normalize: bool = True, max_iters: int = 100_000) -> np.ndarray:
    """``PPR(s, target)`` for every source s, by iterating the reverse recurrence.

    With ``normalize=False`` walks die at dangling rows, which is exactly the
    mass of walks that avoid every dangling node before reaching ``target``.
    """
    e = np.zeros(view.n_nodes)
    e[target] = 1.0
    x = _column_fixed_point(view, e, alpha, tol, max_iters)
    if normalize and view.has_dangling:
        h = _column_fixed_point(view, np.ones(view.n_nodes), alpha, tol, max_iters)
        x = x / h
    return x


@dataclass
class PushState:
    """Reverse-push bookkeeping for one target on one view.

    ``estimates`` and ``residuals`` refer to the sub-stochastic operator of
    ``view``; for every source s,
    ``pi(s, target) = estimates[s] + sum_v pi(s, v) * residuals[v]``.
    """

    view: TransitionView
    target: int
    alpha: float
    epsilon: float
    estimates: np.ndarray
    residuals: np.ndarray
    pushes: int = 0
    recomputed: bool = False

    @property
    def max_residual(self) -> float:
        return float(np.abs(self.residuals).max()) if self.residuals.size else 0.0

    def _pushed(self, eps: float) -> "PushState":
        est, res = self.estimates.copy(), self.residuals.copy()
        pushes = _kernels.reverse_push(*self.view.in_arrays, est, res, self.alpha, eps)
        return replace(self, estimates=est, residuals=res, pushes=self.pushes + pushes)

    def to_estimate(self) -> PprEstimate:
        """Scores ``PPR(s, target)`` within ``epsilon`` for every source s."""
        if not self.view.has_dangling:
            scores = np.clip(self.estimates, 0.0, 1.0)
            return PprEstimate(scores, self.target, Direction.REVERSE, Method.REVERSE_PUSH,
                               self.epsilon, self.pushes)
        # Dangling mass goes back to the seed, so PPR(s, .) = pi(s, .) / |pi(s, .)|_1.
        # Both factors are tightened so the ratio keeps the epsilon bound (|pi(s,.)|_1 >= alpha).
        eps = self.epsilon * self.alpha / 2.0
        num = self._pushed(eps)
        n = self.view.n_nodes
        h = np.zeros(n)
        _kernels.reverse_push(*self.view.in_arrays, h, np.ones(n), self.alpha, eps)
        scores = np.clip(num.estimates / h, 0.0, 1.0)
        return PprEstimate(scores, self.target, Direction.REVERSE, Method.REVERSE_PUSH,
                           self.epsilon, num.pushes)


def ppr_reverse_push(view: TransitionView, target: int, alpha: float = 0.15,
                     epsilon: float = 1e-8) -> PushState:
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    n = view.n_nodes
    res = np.zeros(n)
    res[target] = 1.0
    state = PushState(view, target, alpha, epsilon, np.zeros(n), res)
    return state._pushed(epsilon)


def push_update_remove_actions(state: PushState, user: int, removed: Iterable[int],
                               fallback_mass: float = 0.5) -> PushState:
    """Carry a quiescent push state over to the view without ``removed`` actions.

    Only the user's row changes, so the invariant is restored by adding
    ``(1 - alpha) / alpha * (P_new[u] - P_old[u]) . estimates`` to the user's
    residual and pushing again.  If that correction exceeds ``fallback_mass``
    the state is rebuilt from scratch.
    """
    removed = set(removed)
    if not removed:
        return state
    new_view = remove_actions_view(state.view, user, removed)
    old_row = state.view.row(user)
    new_row = new_view.row(user)
    est = state.estimates
    before = sum(w * est[v] for v, w in old_row.items())
    after = sum(w * est[v] for v, w in new_row.items())
    correction = (1.0 - state.alpha) / state.alpha * (after - before)
    if abs(correction) > fallback_mass:
        fresh = ppr_reverse_push(new_view, state.target, state.alpha, state.epsilon)
        return replace(fresh, recomputed=True)
    res = state.residuals.copy()
    res[user] += correction
    moved = replace(state, view=new_view, estimates=est.copy(), residuals=res, pushes=0)
    return moved._pushed(state.epsilon)


def eligible_items(view_or_graph, user: int) -> list[int]:
    """Items the user has not interacted with: ``I \\ N_out(u)``."""
    g = getattr(view_or_graph, "graph", view_or_graph)
    taken = set(g.out_neighbors(user))
    return [v for v in g.nodes_of_type(NodeType.ITEM) if v not in taken and v != user]


def order_desc(ids: Sequence[int], values, tol: float = 0.0) -> list[int]:
    """Sort ``ids`` by descending value; values within ``tol`` of their
    predecessor form one tie group, ordered by ascending id."""
    ranked = sorted(ids, key=lambda i: (-values[i], i))
    if not ranked:
        return []
    out: list[int] = []
    group = [ranked[0]]
    for prev, cur in zip(ranked, ranked[1:]):
        if values[prev] - values[cur] <= tol:
            group.append(cur)
        else:
            out.extend(sorted(group))
            group = [cur]
    out.extend(sorted(group))
    return out


def top_k_items(view: TransitionView, user: int, k: int, alpha: float = 0.15,
                tol: float = 1e-12, tie_tol: float = 1e-12, scores: np.ndarray | None = None):
    """Top-k eligible items for ``user`` as ``[(item, score), ...]``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    g = view.graph
    if not 0 <= user < g.n_nodes or g.node_types[user] != NodeType.USER:
        raise NotAUser(f"node {user!r} is not a user")
    if scores is None:
        scores = ppr_power(view, user, alpha, tol).scores
    ranked = order_desc(eligible_items(g, user), scores, tie_tol)
    return [(i, float(scores[i])) for i in ranked[:k]]
