"""Data distributions with exact marginals, datasets, and true query means."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import as_rng, check_int, check_vector

__all__ = [
    "Distribution",
    "BernoulliProduct",
    "UniformBox",
    "ClippedGaussian",
    "MdpDistribution",
    "Dataset",
    "sample_dataset",
    "true_mean",
    "distribution_from_dict",
]

_REGISTRY = {}


def _register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


class Distribution:
    """Base class. Subclasses sample fixed-width points and expose marginals.

    The marginal helpers (``coordinate_mean``, ``cdf``, ``cdf_integral``) are
    what query families use to produce exact expectations.
    """

    kind = None

    @property
    def dim(self):
        raise NotImplementedError

    def sample(self, n, rng):
        raise NotImplementedError

    def coordinate_mean(self, j):
        raise NotImplementedError(f"{self.kind} has no closed-form coordinate mean")

    def cdf(self, j, theta):
        """P(X_j <= theta)."""
        raise NotImplementedError(f"{self.kind} has no closed-form marginal cdf")

    def cdf_integral(self, j, c):
        """E[(c - X_j)_+], i.e. the integral of the marginal cdf up to ``c``."""
        raise NotImplementedError(f"{self.kind} has no closed-form partial expectation")

    def to_dict(self):
        raise NotImplementedError


@_register
@dataclass(frozen=True)
class BernoulliProduct(Distribution):
    p: tuple

    kind = "bernoulli_product"

    def __post_init__(self):
        p = check_vector(self.p, name="p")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("bernoulli probabilities must lie in [0, 1]")
        object.__setattr__(self, "p", tuple(float(v) for v in p))

    @property
    def dim(self):
        return len(self.p)

    def sample(self, n, rng):
        return (rng.random((n, self.dim)) < np.asarray(self.p)).astype(float)

    def coordinate_mean(self, j):
        return self.p[j]

    def cdf(self, j, theta):
        if theta < 0:
            return 0.0
        if theta < 1:
            return 1.0 - self.p[j]
        return 1.0

    def cdf_integral(self, j, c):
        p = self.p[j]
        return max(c, 0.0) * (1 - p) + max(c - 1.0, 0.0) * p

    def to_dict(self):
        return {"kind": self.kind, "p": list(self.p)}


@_register
@dataclass(frozen=True)
class UniformBox(Distribution):
    low: tuple = (0.0,)
    high: tuple = (1.0,)

    kind = "uniform_box"

    def __post_init__(self):
        low = check_vector(self.low, name="low")
        high = check_vector(self.high, name="high", dim=low.shape[0])
        if np.any(low < 0) or np.any(high > 1) or np.any(high <= low):
            raise ValueError("uniform box must satisfy 0 <= low < high <= 1")
        object.__setattr__(self, "low", tuple(low.tolist()))
        object.__setattr__(self, "high", tuple(high.tolist()))

    @classmethod
    def unit(cls, dim):
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self):
        return len(self.low)

    def sample(self, n, rng):
        low, high = np.asarray(self.low), np.asarray(self.high)
        return low + (high - low) * rng.random((n, self.dim))

    def coordinate_mean(self, j):
        return 0.5 * (self.low[j] + self.high[j])

    def cdf(self, j, theta):
        lo, hi = self.low[j], self.high[j]
        return float(np.clip((theta - lo) / (hi - lo), 0.0, 1.0))

    def cdf_integral(self, j, c):
        lo, hi = self.low[j], self.high[j]
        if c <= lo:
            return 0.0
        if c <= hi:
            return 0.5 * (c - lo) ** 2 / (hi - lo)
        return 0.5 * (hi - lo) + (c - hi)

    def to_dict(self):
        return {"kind": self.kind, "low": list(self.low), "high": list(self.high)}


@_register
@dataclass(frozen=True)
class ClippedGaussian(Distribution):
    """Independent Gaussian coordinates clipped to [0, 1]."""

    mu: tuple
    sigma: tuple

    kind = "clipped_gaussian"

    def __post_init__(self):
        mu = check_vector(self.mu, name="mu")
        sigma = check_vector(self.sigma, name="sigma")
        if sigma.shape[0] == 1 and mu.shape[0] > 1:
            sigma = np.repeat(sigma, mu.shape[0])
        if sigma.shape != mu.shape or np.any(sigma <= 0):
            raise ValueError("sigma must be positive and match mu in length")
        object.__setattr__(self, "mu", tuple(mu.tolist()))
        object.__setattr__(self, "sigma", tuple(sigma.tolist()))

    @property
    def dim(self):
        return len(self.mu)

    def sample(self, n, rng):
        x = np.asarray(self.mu) + np.asarray(self.sigma) * rng.standard_normal((n, self.dim))
        return np.clip(x, 0.0, 1.0)

    def _gauss_cdf_integral(self, j, c):
        # integral of Phi((y - mu)/sigma) dy from -inf to c
        mu, s = self.mu[j], self.sigma[j]
        z = (c - mu) / s
        return s * (z * stats.norm.cdf(z) + stats.norm.pdf(z))

    def coordinate_mean(self, j):
        # E[clip(X)] = 1 - int_0^1 F(y) dy
        return 1.0 - self.cdf_integral(j, 1.0)

    def cdf(self, j, theta):
        if theta < 0:
            return 0.0
        if theta >= 1:
            return 1.0
        return float(stats.norm.cdf((theta - self.mu[j]) / self.sigma[j]))

    def cdf_integral(self, j, c):
        if c <= 0:
            return 0.0
        upper = min(c, 1.0)
        inner = self._gauss_cdf_integral(j, upper) - self._gauss_cdf_integral(j, 0.0)
        return float(inner + max(c - 1.0, 0.0))

    def to_dict(self):
        return {"kind": self.kind, "mu": list(self.mu), "sigma": list(self.sigma)}


@_register
@dataclass(frozen=True)
class MdpDistribution(Distribution):
    """Transition samples ``(s1, a, r, s2)`` from a finite MDP.

    ``(s1, a)`` is drawn from ``visit_probs``, the reward is Bernoulli with
    mean ``reward_probs[s1, a]`` and ``s2`` follows ``transitions[s1, a]``.
    """

    transitions: np.ndarray
    reward_probs: np.ndarray
    visit_probs: np.ndarray = None

    kind = "mdp"

    def __post_init__(self):
        P = np.array(self.transitions, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError("transitions must have shape (d, m, d)")
        if np.any(P < 0) or not np.allclose(P.sum(axis=2), 1.0, atol=1e-12, rtol=0):
            raise ValueError("each transition row P(i, a, .) must be a distribution")
        R = np.array(self.reward_probs, dtype=float)
        if R.shape != P.shape[:2] or np.any((R < 0) | (R > 1)):
            raise ValueError("reward_probs must have shape (d, m) with entries in [0, 1]")
        if self.visit_probs is None:
            V = np.full(P.shape[:2], 1.0 / (P.shape[0] * P.shape[1]))
        else:
            V = np.array(self.visit_probs, dtype=float)
        if V.shape != P.shape[:2] or np.any(V < 0) or abs(V.sum() - 1) > 1e-12:
            raise ValueError("visit_probs must be a distribution over (state, action)")
        for name, arr in (("transitions", P), ("reward_probs", R), ("visit_probs", V)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self):
        return self.transitions.shape[0]

    @property
    def n_actions(self):
        return self.transitions.shape[1]

    @property
    def dim(self):
        return 4

    def sample(self, n, rng):
        d, m = self.n_states, self.n_actions
        cells = rng.choice(d * m, size=n, p=self.visit_probs.ravel())
        s1, a = np.divmod(cells, m)
        r = (rng.random(n) < self.reward_probs[s1, a]).astype(float)
        cum = np.cumsum(self.transitions[s1, a], axis=1)
        s2 = (rng.random((n, 1)) > cum).sum(axis=1)
        s2 = np.minimum(s2, d - 1)
        return np.column_stack([s1, a, r, s2]).astype(float)

    def to_dict(self):
        return {
            "kind": self.kind,
            "transitions": self.transitions.tolist(),
            "reward_probs": self.reward_probs.tolist(),
            "visit_probs": self.visit_probs.tolist(),
        }

    def __hash__(self):
        return hash((self.transitions.tobytes(), self.reward_probs.tobytes()))

    def __eq__(self, other):
        return (
            isinstance(other, MdpDistribution)
            and np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.reward_probs, other.reward_probs)
            and np.array_equal(self.visit_probs, other.visit_probs)
        )


def distribution_from_dict(spec):
    if isinstance(spec, Distribution):
        return spec
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _REGISTRY:
        raise ValueError(f"unsupported distribution kind {kind!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[kind](**spec)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable sample of ``n`` points drawn with a recorded seed."""

    points: np.ndarray
    seed: object = None
    distribution: Distribution = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("a dataset needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def width(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def to_dict(self):
        return {
            "schema": "adaptive-analysts/dataset",
            "version": 1,
            "n": self.n,
            "seed": self.seed,
            "distribution": None if self.distribution is None else self.distribution.to_dict(),
            "points": self.points.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("version") != 1:
            raise ValueError(f"unsupported dataset document version {doc.get('version')!r}")
        dist = doc.get("distribution")
        return cls(
            np.asarray(doc["points"], dtype=float),
            seed=doc.get("seed"),
            distribution=None if dist is None else distribution_from_dict(dist),
        )


def sample_dataset(dist, n, seed):
    """Draw ``n`` i.i.d. points; the same seed always gives the same dataset."""
    dist = distribution_from_dict(dist)
    n = check_int(n, "n", minimum=1)
    rng = np.random.default_rng(seed)
    return Dataset(dist.sample(n, rng), seed=seed, distribution=dist)


def true_mean(dist, query, *, mc_samples=None, random_state=None, return_stderr=False):
    """Distribution mean of a query.

    Closed-form pairs are exact. Otherwise a Monte-Carlo estimate on fresh
    samples is returned when ``mc_samples`` is given, with its standard error
    if ``return_stderr`` is set.
    """
    dist = distribution_from_dict(dist)
    try:
        mean = np.asarray(query.expectation(dist), dtype=float)
        stderr = np.zeros_like(mean)
    except NotImplementedError as exc:
        if not mc_samples:
            raise ValueError(
                f"query {query.id!r} has no closed-form mean under {dist.kind}; "
                "supply mc_samples"
            ) from exc
        rng = as_rng(random_state)
        values = query(dist.sample(check_int(mc_samples, "mc_samples", minimum=2), rng))
        mean = values.mean(axis=0)
        stderr = values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])
    if return_stderr:
        return mean, stderr
    return mean
