"""Analyst base class: a discrete-time system h_{t+1} = psi_t(h_t, a_t), q_t = f_t(h_t).

States are held in a *native* representation. On a grid of resolution
``delta`` that is an int64 array of coordinates; in continuous mode
(``delta=None``) it is a float array. All transitions are batched: ``ts`` is
a vector of round indices, ``S`` a stack of states and ``A`` a stack of
answers, so many truncated replays advance in one call.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_int, check_positive, check_vector
from ..core import GridState, NormSpec, ones_norm, quantize_rows
from ..queries import ThresholdQuery

__all__ = ["Analyst", "AnalystState", "FixedQueryMap", "ThresholdQueryMap"]

LANDINGS = ("round", "deadzone")


@dataclass(frozen=True)
class AnalystState:
    """Round counter and hidden state (``GridState`` or float vector)."""

    t: int
    h: object

    @property
    def point(self):
        return self.h.point if isinstance(self.h, GridState) else np.asarray(self.h)


def _as_array(x):
    return np.asarray(x, dtype=float)


class Analyst(BaseEstimator):
    """Common machinery for grid or continuous analysts.

    Subclasses set ``klass`` and ``family``, implement ``_psi`` (the real-valued
    transition before landing on the grid), ``query`` (f_t) and the ``d`` /
    ``d_q`` properties, and may override ``empirical_answers`` with a
    vectorised version.

    Declared constants, available after ``fit``: ``contraction_`` (lambda),
    ``lipschitz_`` (L), ``radius_`` (D) and ``c1_`` (norm of the all-ones
    answer). Missing declarations are ``None``.
    """

    klass = None
    family = None

    # -- parameters shared by all families; subclasses list them in __init__
    delta = None
    norm = 2
    landing = "round"

    @property
    def d(self):
        raise NotImplementedError

    @property
    def d_q(self):
        raise NotImplementedError

    @property
    def width(self):
        """Number of data columns the analyst's queries read."""
        return None

    # -- declarations -------------------------------------------------------
    def _declare(self):
        """Return a dict of declared constants; subclasses extend."""
        return {}

    def fit(self, X=None, y=None):
        """Validate parameters and compute declared constants.

        Analysts do not learn from data; ``X`` and ``y`` are accepted only so
        the object composes with estimator tooling.
        """
        if self.delta is not None:
            check_positive(self.delta, "delta")
        if self.landing not in LANDINGS:
            raise ValueError(f"landing must be one of {LANDINGS}, got {self.landing!r}")
        self.norm_ = NormSpec.coerce(self.norm)
        self.c1_ = ones_norm(self.d_q, self.norm_)
        declared = {"contraction": None, "lipschitz": None, "radius": None}
        declared.update(self._declare())
        for key, value in declared.items():
            setattr(self, f"{key}_", value)
        return self

    def _ensure_fitted(self):
        if not hasattr(self, "norm_"):
            self.fit()

    # -- state helpers --------------------------------------------------------
    @property
    def grid(self):
        return self.delta is not None

    def zero_states(self, m=1):
        dtype = np.int64 if self.grid else float
        return np.zeros((m, self.d), dtype=dtype)

    def to_real(self, S):
        S = np.asarray(S)
        return S * self.delta if self.grid else S.astype(float)

    def wrap(self, s):
        """Native state vector -> GridState or read-only float vector."""
        if self.grid:
            return GridState(s, self.delta)
        out = np.array(s, dtype=float)
        out.setflags(write=False)
        return out

    def unwrap(self, h):
        if isinstance(h, GridState):
            if not self.grid or h.delta != self.delta:
                raise ValueError("grid state resolution does not match the analyst")
            return h.coords
        h = check_vector(h, name="h", dim=self.d)
        if self.grid:
            return quantize_rows(h[None], self.delta)[0]
        return h

    # -- dynamics ---------------------------------------------------------
    def _psi(self, ts, H, A):
        """Real-valued transition for rows ``H`` (m, d) and answers ``A`` (m, d_q)."""
        raise NotImplementedError

    def advance(self, ts, S, A):
        """Batched ``h_{t+1} = psi_t(h_t, a_t)`` in native representation."""
        self._ensure_fitted()
        S = np.asarray(S)
        A = np.atleast_2d(_as_array(A))
        ts = np.broadcast_to(np.asarray(ts, dtype=np.int64), (S.shape[0],))
        if A.shape != (S.shape[0], self.d_q):
            raise ValueError(f"answers have shape {A.shape}, expected ({S.shape[0]}, {self.d_q})")
        H = self.to_real(S)
        nxt = self._psi(ts, H, A)
        if not self.grid:
            return nxt
        if self.landing == "round":
            return quantize_rows(nxt, self.delta)
        # dead-zone landing: move by whole grid steps toward the target,
        # truncating the increment toward zero
        steps = np.trunc((nxt - H) / self.delta)
        if not np.all(np.isfinite(steps)):
            raise ValueError("non-finite state update")
        return S + steps.astype(np.int64)

    def initial_state(self):
        """h_1 = h_0 = 0; the first query does not depend on any answer."""
        return AnalystState(1, self.wrap(self.zero_states(1)[0]))

    def step(self, state, a):
        """One transition; returns the state for round ``state.t + 1``."""
        a = check_vector(a, name="answer", dim=self.d_q)
        s = self.unwrap(state.h)
        nxt = self.advance([state.t], s[None], a[None])[0]
        return AnalystState(state.t + 1, self.wrap(nxt))

    def query(self, t, h):
        """f_t(h) as a QueryFn; ``h`` is a real vector."""
        raise NotImplementedError

    def next_query(self, state):
        return self.query(state.t, state.point)

    def empirical_answers(self, ts, S, points):
        """Batched q_t(S) for the queries issued at native states ``S``."""
        H = self.to_real(S)
        ts = np.broadcast_to(np.asarray(ts, dtype=np.int64), (H.shape[0],))
        return np.vstack([self.query(int(t), h)(points).mean(axis=0) for t, h in zip(ts, H)])

    def transform(self, answers):
        """Passive replay of an answer sequence from h_1 = 0.

        Parameters
        ----------
        answers : array-like of shape (T, d_q)

        Returns
        -------
        ndarray of shape (T + 1, d)
            Native states h_1, ..., h_{T+1}.
        """
        answers = np.atleast_2d(_as_array(answers))
        out = self.zero_states(answers.shape[0] + 1)
        for i, a in enumerate(answers):
            out[i + 1] = self.advance([i + 1], out[i : i + 1], a[None])[0]
        return out

    def to_dict(self):
        params = {}
        for key, value in self.get_params(deep=False).items():
            if isinstance(value, np.ndarray):
                value = value.tolist()
            elif hasattr(value, "to_dict"):
                value = value.to_dict()
            params[key] = value
        return {"family": self.family, "klass": self.klass, **params}


class FixedQueryMap:
    """f_t(h) = q for a fixed query: a non-adaptive analyst."""

    def __init__(self, query):
        self.query_fn = query

    @property
    def d_q(self):
        return self.query_fn.d_q

    @property
    def width(self):
        return None

    def query(self, t, h):
        return self.query_fn

    def batched_means(self, ts, H, points):
        row = self.query_fn(points).mean(axis=0)
        return np.broadcast_to(row, (H.shape[0], row.shape[0])).copy()

    def to_dict(self):
        return {"kind": "fixed", "query": self.query_fn.id}


class ThresholdQueryMap:
    """Threshold queries whose cut points move with the state.

    ``q_t(x)_j = 1{x[coords[j]] <= clip(offset + (W h)_j, 0, 1)}``.
    """

    def __init__(self, W, coords=None, offset=0.5):
        self.W = np.atleast_2d(_as_array(W))
        d_q = self.W.shape[0]
        self.coords = np.arange(d_q) if coords is None else np.asarray(coords, dtype=np.int64)
        if self.coords.shape != (d_q,):
            raise ValueError("need one data coordinate per query output")
        self.offset = float(offset)

    @property
    def d_q(self):
        return self.W.shape[0]

    @property
    def width(self):
        return int(self.coords.max()) + 1

    def thresholds(self, H):
        return np.clip(self.offset + row_matmul(H, self.W), 0.0, 1.0)

    def query(self, t, h):
        return ThresholdQuery(self.coords, self.thresholds(h)[0])

    def batched_means(self, ts, H, points):
        theta = self.thresholds(H)
        cols = points[:, self.coords]
        return (cols[None, :, :] <= theta[:, None, :]).mean(axis=1)

    def to_dict(self):
        return {"kind": "threshold", "W": self.W.tolist(), "coords": self.coords.tolist(),
                "offset": self.offset}


def row_matmul(H, M):
    """``H @ M.T`` computed row by row, so a row's result does not depend on the batch.

    BLAS picks different kernels (and rounding) for different batch sizes; live
    sessions step one row at a time while replays step many.
    """
    H = np.atleast_2d(H)
    return (H[:, None, :] * np.asarray(M)[None]).sum(axis=-1)


def check_query_map(query_map, d_q):
    if query_map.d_q != d_q:
        raise ValueError(f"query map emits {query_map.d_q} outputs, analyst expects {d_q}")
    return query_map


def check_round(t):
    return check_int(int(t), "t", minimum=1)
