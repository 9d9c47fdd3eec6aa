"""Value-iteration analyst over a finite MDP with rewards estimated from data."""

import numpy as np

from .._validation import check_int
from ..distributions import MdpDistribution
from ..queries import QueryFn
from .base import Analyst

__all__ = ["bellman_step", "reward_estimate", "rewards_from_answer", "CellQuery", "BellmanAnalyst"]


def _check_transitions(P):
    P = np.asarray(P, dtype=float)
    if P.ndim != 3 or P.shape[0] != P.shape[2]:
        raise ValueError("transitions must have shape (d, m, d)")
    if P.shape[1] == 0:
        raise ValueError("the action set is empty")
    if np.any(P < 0) or not np.allclose(P.sum(axis=2), 1.0, atol=1e-12, rtol=0):
        raise ValueError("each transition row P(i, a, .) must sum to 1")
    return P


def bellman_step(h, rewards, transitions, gamma):
    """``h'_i = max_a (r(i, a) + gamma * sum_j P(i, a, j) h_j)``.

    ``h`` may be a single vector (d,) or a batch (m, d) with rewards of shape
    (d, n_actions) or (m, d, n_actions).
    """
    P = _check_transitions(transitions)
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    h = np.asarray(h, dtype=float)
    r = np.asarray(rewards, dtype=float)
    single = h.ndim == 1
    H = np.atleast_2d(h)
    R = r if r.ndim == 3 else np.broadcast_to(r, (H.shape[0],) + r.shape)
    if H.shape[1] != P.shape[0] or R.shape[1:] != P.shape[:2]:
        raise ValueError("value vector, rewards and transitions disagree in size")
    out = (R + gamma * np.einsum("iaj,mj->mia", P, H)).max(axis=2)
    return out[0] if single else out


def reward_estimate(S, i, a):
    """Mean reward over tuples ``(s1, a, r, s2)`` with ``s1 == i`` and action ``a``.

    Cells with no tuples get 0.
    """
    points = S.points if hasattr(S, "points") else np.asarray(S, dtype=float)
    mask = (points[:, 0] == i) & (points[:, 1] == a)
    if not mask.any():
        return 0.0
    return float(points[mask, 2].mean())


def rewards_from_answer(A, n_states, n_actions):
    """Turn answers ``(E[r 1{cell}], E[1{cell}])`` into clipped reward estimates."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    cells = n_states * n_actions
    num, den = A[:, :cells], A[:, cells:]
    safe = np.where(den > 0, den, 1.0)
    r = np.where(den > 0, np.clip(num / safe, 0.0, 1.0), 0.0)
    return r.reshape(-1, n_states, n_actions)


class CellQuery(QueryFn):
    """Per-cell reward mass and visit indicator for transition samples.

    For a point ``(s1, a, r, s2)`` the output is ``r * 1{cell}`` for every
    (state, action) cell followed by ``1{cell}``; ratios of the two halves
    are the empirical reward estimates.
    """

    family = "cell"

    def __init__(self, n_states, n_actions):
        self.n_states = check_int(n_states, "n_states", minimum=1)
        self.n_actions = check_int(n_actions, "n_actions", minimum=1)

    @property
    def d_q(self):
        return 2 * self.n_states * self.n_actions

    def params(self):
        return {"n_states": self.n_states, "n_actions": self.n_actions}

    def _evaluate(self, points):
        cells = self.n_states * self.n_actions
        idx = points[:, 0].astype(np.int64) * self.n_actions + points[:, 1].astype(np.int64)
        onehot = np.zeros((points.shape[0], cells))
        onehot[np.arange(points.shape[0]), idx] = 1.0
        return np.hstack([onehot * points[:, 2:3], onehot])

    def expectation(self, dist):
        if not isinstance(dist, MdpDistribution):
            raise NotImplementedError("cell queries have closed-form means only under an MDP")
        visits = dist.visit_probs.ravel()
        return np.concatenate([visits * dist.reward_probs.ravel(), visits])


class BellmanAnalyst(Analyst):
    """Value iteration whose reward table is re-estimated from every answer.

    The state is the value vector. The analyst is gamma-contractive in the
    sup norm; the reward ratio has no finite Lipschitz constant in the
    answers, so ``lipschitz_`` is infinite.
    """

    family = "bellman"
    klass = "progressive"

    def __init__(self, transitions, gamma=0.9, *, delta=None, norm="inf", landing="round"):
        self.transitions = transitions
        self.gamma = gamma
        self.delta = delta
        self.norm = norm
        self.landing = landing

    @property
    def d(self):
        return np.shape(self.transitions)[0]

    @property
    def n_actions(self):
        return np.shape(self.transitions)[1]

    @property
    def d_q(self):
        return 2 * self.d * self.n_actions

    @property
    def width(self):
        return 4

    def _declare(self):
        self.transitions_ = _check_transitions(self.transitions)
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if self.norm_.p != np.inf:
            raise ValueError("the Bellman operator contracts in the sup norm; use norm='inf'")
        self.query_ = CellQuery(self.d, self.n_actions)
        return {"contraction": float(self.gamma), "lipschitz": np.inf}

    def _psi(self, ts, H, A):
        R = rewards_from_answer(A, self.d, self.n_actions)
        return bellman_step(H, R, self.transitions_, self.gamma)

    def query(self, t, h):
        self._ensure_fitted()
        return self.query_

    def empirical_answers(self, ts, S, points):
        self._ensure_fitted()
        row = self.query_(points).mean(axis=0)
        return np.broadcast_to(row, (np.shape(S)[0], row.shape[0])).copy()
