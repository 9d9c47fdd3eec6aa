"""Statistical queries: maps from a data point to [0, 1]^d_q.

A query's ``id`` is a digest of its family and parameters, so two queries
with the same id evaluate identically. Transcript replay relies on this.
"""

import hashlib
import json

import numpy as np

from ._validation import check_vector
from .distributions import BernoulliProduct

__all__ = [
    "QueryFn",
    "ConstantQuery",
    "CoordinateQuery",
    "ThresholdQuery",
    "VoteQuery",
]


def _canonical(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in value.items()}
    return value


class QueryFn:
    """Base class for statistical queries.

    Subclasses implement ``_evaluate(points) -> (n, d_q)`` and ``params()``.
    ``expectation(dist)`` returns the exact mean or raises
    ``NotImplementedError`` when no closed form is available.
    """

    family = None

    @property
    def d_q(self):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    @property
    def id(self):
        cached = getattr(self, "_id", None)
        if cached is None:
            payload = json.dumps(_canonical(self.params()), sort_keys=True)
            digest = hashlib.sha256(payload.encode()).hexdigest()[:16]
            cached = f"{self.family}:{digest}"
            object.__setattr__(self, "_id", cached)
        return cached

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        values = np.asarray(self._evaluate(points), dtype=float).reshape(points.shape[0], -1)
        return np.clip(values, 0.0, 1.0)

    def _evaluate(self, points):
        raise NotImplementedError

    def expectation(self, dist):
        raise NotImplementedError(f"{self.family} has no closed-form mean under {dist.kind}")

    def __eq__(self, other):
        return isinstance(other, QueryFn) and self.id == other.id

    def __hash__(self):
        return hash(self.id)

    def __repr__(self):
        return f"<{type(self).__name__} {self.id} d_q={self.d_q}>"


class ConstantQuery(QueryFn):
    """Ignores the data; answers are exact and reveal nothing."""

    family = "constant"

    def __init__(self, values):
        values = check_vector(values, name="values")
        if np.any((values < 0) | (values > 1)):
            raise ValueError("constant query values must lie in [0, 1]")
        self.values = values

    @property
    def d_q(self):
        return self.values.shape[0]

    def params(self):
        return {"values": self.values}

    def _evaluate(self, points):
        return np.broadcast_to(self.values, (points.shape[0], self.d_q))

    def expectation(self, dist):
        return self.values.copy()


class CoordinateQuery(QueryFn):
    """Returns selected coordinates of the point, clipped to [0, 1]."""

    family = "coordinate"

    def __init__(self, indices):
        self.indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))

    @property
    def d_q(self):
        return self.indices.shape[0]

    def params(self):
        return {"indices": self.indices}

    def _evaluate(self, points):
        return points[:, self.indices]

    def expectation(self, dist):
        return np.array([dist.coordinate_mean(int(j)) for j in self.indices])


class ThresholdQuery(QueryFn):
    """``q_j(x) = 1{x[coords[j]] <= thresholds[j]}``."""

    family = "threshold"

    def __init__(self, coords, thresholds):
        self.coords = np.atleast_1d(np.asarray(coords, dtype=np.int64))
        self.thresholds = check_vector(thresholds, name="thresholds", dim=self.coords.shape[0])

    @property
    def d_q(self):
        return self.coords.shape[0]

    def params(self):
        return {"coords": self.coords, "thresholds": self.thresholds}

    def _evaluate(self, points):
        return (points[:, self.coords] <= self.thresholds).astype(float)

    def expectation(self, dist):
        return np.array(
            [dist.cdf(int(c), float(th)) for c, th in zip(self.coords, self.thresholds)]
        )


class VoteQuery(QueryFn):
    """Weighted vote over boolean coordinates.

    ``q(x) = 1{sum_j weights[j] * (2 x[j] - 1) >= threshold}`` with integer
    weights. Under a Bernoulli product the mean is computed exactly by
    convolving the per-coordinate contributions.
    """

    family = "vote"

    def __init__(self, weights, threshold=0):
        w = np.asarray(weights)
        if w.ndim != 1 or not np.all(w == np.round(w)):
            raise ValueError("vote weights must be a 1-d integer vector")
        self.weights = w.astype(np.int64)
        self.threshold = int(threshold)

    @property
    def d_q(self):
        return 1

    def params(self):
        return {"weights": self.weights, "threshold": self.threshold}

    def _evaluate(self, points):
        k = self.weights.shape[0]
        score = (2.0 * points[:, :k] - 1.0) @ self.weights
        return (score >= self.threshold).astype(float)

    def expectation(self, dist):
        if not isinstance(dist, BernoulliProduct):
            raise NotImplementedError("vote means are closed-form only for Bernoulli products")
        total = int(np.abs(self.weights).sum())
        # probability mass over score in [-total, total], offset by total
        mass = np.zeros(2 * total + 1)
        mass[total] = 1.0
        for j, w in enumerate(self.weights):
            if w == 0:
                continue
            p = dist.p[j]
            w = int(w)
            shifted = np.zeros_like(mass)
            if w > 0:
                shifted[w:] += p * mass[:-w]
                shifted[:-w] += (1 - p) * mass[w:]
            else:
                w = -w
                shifted[:-w] += p * mass[w:]
                shifted[w:] += (1 - p) * mass[:-w]
            mass = shifted
        scores = np.arange(-total, total + 1)
        return np.array([mass[scores >= self.threshold].sum()])
