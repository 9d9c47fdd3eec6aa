"""Statistical mechanisms answering queries on a fixed dataset.

Mechanisms follow the estimator convention: hyper-parameters go to
``__init__``, ``fit`` binds the dataset, and ``answer``/``transform`` respond to
queries. Gaussian noise is counter-based: the draw for round ``t`` depends
only on ``(seed, t)``, so a replayed or truncated analyst can be handed the
exact noise realisation the full analyst saw.
"""

import csv
import math
from collections import namedtuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_int, check_positive
from .distributions import Dataset

__all__ = [
    "Response",
    "Mechanism",
    "EmpiricalMechanism",
    "RoundedEmpiricalMechanism",
    "GaussianMechanism",
    "ClampedGaussianMechanism",
    "empirical_answer",
    "rounded_empirical_answer",
    "rounded_grid_size",
    "gaussian_answer",
    "clamped_gaussian_answer",
    "clamp_unit_box",
    "sigma_for",
    "sample_accuracy_rate",
    "mechanism_from_dict",
]

Response = namedtuple("Response", ["answer", "empirical", "noise"])

_TOL = 1e-9


def empirical_answer(S, q):
    """Sample mean of ``q`` over the dataset, coordinate-wise in [0, 1]."""
    points = S.points if isinstance(S, Dataset) else np.asarray(S, dtype=float)
    return q(points).mean(axis=0)


def _rounding_grid(n, epsilon):
    frac = 2.0 * n / epsilon
    top = math.floor(frac + _TOL)
    on_grid = abs(frac - top) <= _TOL
    return epsilon / (2.0 * n), top, on_grid


def rounded_grid_size(n, epsilon, d_q=1):
    """Number of distinct answers the rounded-empirical mechanism can emit."""
    _, top, on_grid = _rounding_grid(n, epsilon)
    per_coord = top + 1 if on_grid else top + 2
    return per_coord**d_q


def _round_to_answer_grid(values, n, epsilon):
    step, top, on_grid = _rounding_grid(n, epsilon)
    values = np.asarray(values, dtype=float)
    idx = np.clip(np.rint(values / step), 0, top)
    out = idx * step
    if on_grid:
        out[idx == top] = 1.0
    else:
        # 1 is an extra grid point when 2n/epsilon is fractional
        closer_to_one = np.abs(1.0 - values) < np.abs(out - values)
        out[closer_to_one] = 1.0
    return out


def rounded_empirical_answer(S, q, epsilon):
    """Empirical answer projected onto {0, eps/2n, eps/n, ..., 1}^d_q."""
    if not epsilon > 0 or epsilon > 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    n = S.n if isinstance(S, Dataset) else len(S)
    return _round_to_answer_grid(empirical_answer(S, q), n, epsilon)


def clamp_unit_box(x):
    """Coordinate-wise truncation to [0, 1]."""
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def gaussian_answer(S, q, sigma, rng):
    check_positive(sigma, "sigma")
    emp = empirical_answer(S, q)
    return emp + sigma * rng.standard_normal(emp.shape[0])


def clamped_gaussian_answer(S, q, sigma, rng):
    return clamp_unit_box(gaussian_answer(S, q, sigma, rng))


def sigma_for(epsilon, delta, t, d_q):
    """Noise scale epsilon / sqrt(2 ln(2 t d_q / (epsilon delta))).

    With this scale, ``t`` Gaussian answers all stay within ``epsilon`` of the
    empirical values except with probability ``epsilon * delta``.
    """
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    t = check_int(t, "t", minimum=1)
    d_q = check_int(d_q, "d_q", minimum=1)
    arg = 2.0 * t * d_q / (epsilon * delta)
    if arg <= 1:
        raise ValueError("log argument must exceed 1 for a real noise scale")
    return epsilon / math.sqrt(2.0 * math.log(arg))


def sample_accuracy_rate(transcript, epsilon):
    """Fraction of rounds where the answer is at least ``epsilon`` from q(S) in sup-norm."""
    rounds = list(transcript)
    if not rounds:
        raise ValueError("empty transcript")
    misses = sum(np.max(np.abs(r.answer - r.empirical)) >= epsilon for r in rounds)
    return misses / len(rounds)


class Mechanism(BaseEstimator):
    """Base class for mechanisms bound to one dataset.

    Parameters
    ----------
    random_state : int or None
        Seed for the counter-based noise stream. ``None`` draws a fresh seed at
        ``fit`` time and records it in ``seed_``.
    """

    kind = None
    noisy = False

    def __init__(self, *, random_state=None):
        self.random_state = random_state

    def _check_params(self):
        pass

    def fit(self, X, y=None):
        """Bind the dataset the mechanism answers on.

        Parameters
        ----------
        X : Dataset or array-like of shape (n_samples, n_features)
        y : ignored

        Returns
        -------
        self
        """
        self._check_params()
        if isinstance(X, Dataset):
            self.dataset_ = X
        else:
            self.dataset_ = Dataset(check_array(X, ensure_2d=True, dtype=float))
        self.n_ = self.dataset_.n
        if self.random_state is None:
            self.seed_ = int(np.random.SeedSequence().entropy % (2**63))
        else:
            self.seed_ = int(self.random_state)
        self.noise_log_ = []
        self.round_ = 0
        return self

    def noise(self, t, d_q):
        """Noise vector added in round ``t`` (zero for exact mechanisms)."""
        return np.zeros(d_q)

    def _respond(self, empirical, noise):
        return empirical + noise

    def respond(self, query, t=None):
        """Answer ``query`` as round ``t`` and return answer, q(S) and noise."""
        check_is_fitted(self, "dataset_")
        if t is None:
            t = self.round_ + 1
        self.round_ = max(self.round_, t)
        emp = empirical_answer(self.dataset_, query)
        xi = self.noise(t, emp.shape[0])
        ans = self._respond(emp, xi)
        if self.noisy:
            self.noise_log_.append((t, xi))
        return Response(ans, emp, xi)

    def answer(self, query, t=None):
        return self.respond(query, t).answer

    def transform(self, queries):
        """Answer a sequence of queries in order, one round each."""
        return np.vstack([self.answer(q) for q in queries])

    def answer_range_size(self, d_q):
        """Cardinality of the answer set, or ``None`` when it is infinite."""
        return None

    def to_dict(self):
        return {"kind": self.kind, **self.get_params()}

    def write_noise_log(self, path):
        check_is_fitted(self, "noise_log_")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            width = max((len(xi) for _, xi in self.noise_log_), default=0)
            writer.writerow(["t"] + [f"xi_{j}" for j in range(width)])
            for t, xi in self.noise_log_:
                writer.writerow([t] + [repr(float(v)) for v in xi])


class EmpiricalMechanism(Mechanism):
    """Returns the exact sample mean."""

    kind = "empirical"


class RoundedEmpiricalMechanism(Mechanism):
    """Projects the sample mean onto a grid of step ``epsilon / (2 n)``."""

    kind = "rounded_empirical"

    def __init__(self, epsilon=1.0, *, random_state=None):
        self.epsilon = epsilon
        self.random_state = random_state

    def _check_params(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")

    def _respond(self, empirical, noise):
        return _round_to_answer_grid(empirical, self.n_, self.epsilon)

    def answer_range_size(self, d_q):
        check_is_fitted(self, "n_")
        return rounded_grid_size(self.n_, self.epsilon, d_q)


class GaussianMechanism(Mechanism):
    """Adds i.i.d. N(0, sigma^2) noise per coordinate; answers are unbounded."""

    kind = "gaussian"
    noisy = True

    def __init__(self, sigma=0.1, *, random_state=None):
        self.sigma = sigma
        self.random_state = random_state

    def _check_params(self):
        check_positive(self.sigma, "sigma")

    def noise(self, t, d_q):
        check_is_fitted(self, "seed_")
        rng = np.random.default_rng([self.seed_, int(t)])
        return self.sigma * rng.standard_normal(d_q)


class ClampedGaussianMechanism(GaussianMechanism):
    """Gaussian mechanism followed by truncation to the unit box."""

    kind = "clamped_gaussian"

    def _respond(self, empirical, noise):
        return clamp_unit_box(empirical + noise)


_REGISTRY = {
    cls.kind: cls
    for cls in (
        EmpiricalMechanism,
        RoundedEmpiricalMechanism,
        GaussianMechanism,
        ClampedGaussianMechanism,
    )
}


def mechanism_from_dict(spec):
    if isinstance(spec, Mechanism):
        return spec
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _REGISTRY:
        raise ValueError(f"unknown mechanism kind {kind!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[kind](**spec)
