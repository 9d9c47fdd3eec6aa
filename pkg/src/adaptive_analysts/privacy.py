"""Privacy accounting: Gaussian-mechanism parameters, composition, truncation depths.

All hidden constants in asymptotic bounds are pinned to 1; ``plan_samples``
exposes a ``multiplier`` for calibration.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_positive

__all__ = [
    "DpParams",
    "DepthResult",
    "gaussian_dp",
    "mechanism_dp",
    "linear_compose",
    "strong_compose",
    "depth_progressive",
    "depth_conservative_a",
    "depth_conservative_b",
    "depth_continuous",
    "history_dp",
    "plan_samples",
]


@dataclass(frozen=True)
class DpParams:
    """An (alpha, beta) differential-privacy guarantee."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha >= 0):
            raise ValueError(f"alpha must be nonnegative, got {self.alpha!r}")
        if not (0 <= self.beta <= 1):
            raise ValueError(f"beta must lie in [0, 1], got {self.beta!r}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    def __iter__(self):
        return iter((self.alpha, self.beta))

    def to_dict(self):
        return {"alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class DepthResult:
    """Closed-form depth ``k_real`` and the integer depth ``k_int`` actually used.

    ``saturated`` is False only for schedule-based depths whose threshold is
    never crossed within the supplied horizon; ``k_int`` is then the horizon
    plus one and ``k_real`` is infinite.
    """

    k_real: float
    k_int: int
    saturated: bool = True

    @classmethod
    def from_real(cls, k_real):
        k_real = max(0.0, float(k_real))
        return cls(k_real, max(1, math.ceil(k_real)))

    def to_dict(self):
        return {"k_real": self.k_real, "k_int": self.k_int, "saturated": self.saturated}


def _check_prob(value, name, *, open_interval=False):
    value = float(value)
    if open_interval:
        if not 0 < value < 1:
            raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
    elif not 0 <= value <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def gaussian_dp(sigma, n, d_q, beta):
    """Privacy of one Gaussian answer with l2 sensitivity sqrt(d_q)/n.

    Parameters
    ----------
    sigma : float
        Per-coordinate noise scale.
    n : int
        Dataset size.
    d_q : int
        Query dimension.
    beta : float
        Target failure probability in (0, 1).

    Returns
    -------
    DpParams
    """
    sigma = check_positive(sigma, "sigma")
    n = check_int(n, "n", minimum=1)
    d_q = check_int(d_q, "d_q", minimum=1)
    beta = _check_prob(beta, "beta", open_interval=True)
    alpha = math.sqrt(2.0 * math.log(1.25 / beta)) * math.sqrt(d_q) / (n * sigma)
    return DpParams(alpha, beta)


def mechanism_dp(mechanism, d_q, beta):
    """Guarantee of one answer from a fitted noisy mechanism.

    Clamping is post-processing, so the clamped Gaussian mechanism reports
    the same guarantee as the plain one. Exact mechanisms are not private.
    """
    if not getattr(mechanism, "noisy", False):
        raise ValueError(f"{type(mechanism).__name__} adds no noise and is not private")
    if not hasattr(mechanism, "n_"):
        raise ValueError("mechanism must be fitted to know the dataset size")
    return gaussian_dp(mechanism.sigma, mechanism.n_, d_q, beta)


def linear_compose(parts):
    """Sum the guarantees of sequentially composed mechanisms (beta capped at 1)."""
    parts = [p if isinstance(p, DpParams) else DpParams(*p) for p in parts]
    if not parts:
        raise ValueError("cannot compose an empty list of guarantees")
    return DpParams(sum(p.alpha for p in parts), min(1.0, sum(p.beta for p in parts)))


def strong_compose(k, alpha, beta, beta_prime):
    """Advanced composition of ``k`` (alpha, beta) mechanisms.

    Returns ``(sqrt(2 k ln(1/beta')) alpha + 2 k alpha^2, k beta + beta')`` with
    the failure probability capped at 1.
    """
    k = check_int(k, "k", minimum=0)
    if not alpha >= 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha!r}")
    if alpha > 1:
        raise ValueError(
            f"alpha={alpha!r} > 1: the bound e^alpha - 1 <= 2 alpha behind the "
            "2 k alpha^2 term fails"
        )
    beta = _check_prob(beta, "beta")
    beta_prime = _check_prob(beta_prime, "beta_prime")
    if k == 0:
        return DpParams(0.0, beta_prime)
    if alpha == 0:
        a = 0.0
    else:
        if beta_prime == 0:
            raise ValueError("beta_prime must be positive when alpha > 0")
        a = math.sqrt(2.0 * k * math.log(1.0 / beta_prime)) * alpha + 2.0 * k * alpha**2
    return DpParams(a, min(1.0, k * beta + beta_prime))


def _check_lambda(lam, *, allow_zero):
    lam = float(lam)
    lower_ok = lam >= 0 if allow_zero else lam > 0
    if not (lower_ok and lam < 1):
        interval = "[0, 1)" if allow_zero else "(0, 1)"
        raise ValueError(f"contraction factor must lie in {interval}, got {lam!r}")
    return lam


def _log_ratio_depth(numerator_over_denominator, lam):
    if numerator_over_denominator <= 1:
        return DepthResult.from_real(0.0)
    return DepthResult.from_real(math.log(numerator_over_denominator) / math.log(1.0 / lam))


def depth_progressive(lam, L, C1, delta):
    """Depth after which a lambda-contractive grid analyst forgets old answers.

    ``k_real = ln(L C1 / ((1 - lam) lam delta)) / ln(1 / lam)``; ``lam = 0``
    gives depth 1 since the state then depends on the last answer only.
    """
    lam = _check_lambda(lam, allow_zero=True)
    L = check_positive(L, "L")
    C1 = check_positive(C1, "C1")
    delta = check_positive(delta, "delta")
    if lam == 0:
        return DepthResult(0.0, 1)
    return _log_ratio_depth(L * C1 / ((1.0 - lam) * lam * delta), lam)


def _schedule_values(eta, t_max):
    if callable(eta):
        return np.array([float(eta(t)) for t in range(1, t_max + 1)])
    values = np.asarray(eta, dtype=float).reshape(-1)
    if values.shape[0] < t_max:
        raise ValueError(f"schedule has {values.shape[0]} entries, horizon is {t_max}")
    return values[:t_max]


def depth_conservative_a(eta, delta, C1, t_max=10_000):
    """First index ``t >= 1`` with ``eta_t < delta / C1``.

    Parameters
    ----------
    eta : callable or sequence
        Step schedule ``t -> eta_t`` (1-based) or its values from ``t = 1``.
    delta, C1 : float
    t_max : int
        Search horizon.

    Returns
    -------
    DepthResult
        With ``saturated=False`` if no index up to ``t_max`` qualifies.
    """
    delta = check_positive(delta, "delta")
    C1 = check_positive(C1, "C1")
    t_max = check_int(t_max, "t_max", minimum=1)
    values = _schedule_values(eta, t_max)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("step schedule must be finite and nonnegative")
    if np.any(np.diff(values) > 0):
        raise ValueError("step schedule must be nonincreasing")
    hits = np.flatnonzero(values < delta / C1)
    if hits.size == 0:
        return DepthResult(math.inf, t_max + 1, saturated=False)
    t = int(hits[0]) + 1
    return DepthResult(float(t), t)


def depth_conservative_b(lam, D, delta):
    """``k_real = ln(D / (delta lam)) / ln(1 / lam)`` for bounded-state analysts."""
    lam = _check_lambda(lam, allow_zero=False)
    D = check_positive(D, "D")
    delta = check_positive(delta, "delta")
    return _log_ratio_depth(D / (delta * lam), lam)


def depth_continuous(lam, D, d, lam_min, epsilon):
    """``k_real = ln(D sqrt(d) / (sqrt(lam_min) epsilon)) / ln(1 / lam)``."""
    lam = _check_lambda(lam, allow_zero=False)
    D = check_positive(D, "D")
    d = check_int(d, "d", minimum=1)
    if not lam_min > 0:
        raise ValueError(f"lam_min must be positive (covariance not definite), got {lam_min!r}")
    epsilon = check_positive(epsilon, "epsilon")
    return _log_ratio_depth(D * math.sqrt(d) / (math.sqrt(lam_min) * epsilon), lam)


def history_dp(mech, depth, beta_prime):
    """Privacy of the hidden state at any round, via the truncation depth."""
    mech = mech if isinstance(mech, DpParams) else DpParams(*mech)
    k = depth.k_int if isinstance(depth, DepthResult) else int(depth)
    return strong_compose(k, mech.alpha, mech.beta, beta_prime)


def plan_samples(epsilon, delta, K, d_q, t, multiplier=1.0):
    """Dataset size ``ceil(multiplier * sqrt(K d_q ln max(t, 2)) / epsilon^2)``."""
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    k = K.k_int if isinstance(K, DepthResult) else int(K)
    k = max(k, 1)
    d_q = check_int(d_q, "d_q", minimum=1)
    t = check_int(t, "t", minimum=1)
    multiplier = check_positive(multiplier, "multiplier")
    return math.ceil(multiplier * math.sqrt(k * d_q * math.log(max(t, 2))) / epsilon**2)
