"""Gradient-descent analysts with decaying (type A) or constant (type B) steps.

Queries ask for per-sample gradients. Since queries must be [0, 1]-valued,
a gradient ``g`` bounded by ``G`` is sent as the pair ``(g+ / G, g- / G)``
(positive and negative parts), so ``d_q = 2 d``. The encoding is linear in
the mean, decodes exactly as ``G (a+ - a-)``, and the zero answer decodes to a
zero gradient, so psi_t(h, 0) = h.
"""

import numpy as np

from .._validation import check_int, check_positive, check_vector
from ..core import operator_norm, quantize
from ..queries import QueryFn
from .base import Analyst

__all__ = [
    "PowerSchedule",
    "ExponentialSchedule",
    "ConstantSchedule",
    "schedule_from_spec",
    "QuadraticLoss",
    "LogisticLoss",
    "loss_from_spec",
    "GradientQuery",
    "encode_gradient",
    "decode_gradient",
    "gd_step_a",
    "gd_step_b",
    "gd_contraction_bound",
    "TypeAGradientAnalyst",
    "TypeBGradientAnalyst",
    "lambda_min",
    "eta_for_contraction",
]


# -- step schedules ----------------------------------------------------------


class PowerSchedule:
    """``eta_t = eta0 / t**a`` with ``a`` in (1/2, 1]."""

    kind = "power"

    def __init__(self, eta0=1.0, a=1.0):
        self.eta0 = check_positive(eta0, "eta0", strict=False)
        if not 0.5 < a <= 1:
            raise ValueError(f"power-schedule exponent must lie in (0.5, 1], got {a!r}")
        self.a = float(a)

    def __call__(self, t):
        return self.eta0 / np.power(np.asarray(t, dtype=float), self.a)

    def to_dict(self):
        return {"kind": self.kind, "eta0": self.eta0, "a": self.a}


class ExponentialSchedule:
    """``eta_t = eta0 * rate**t`` with ``rate`` in (0, 1)."""

    kind = "exponential"

    def __init__(self, eta0=1.0, rate=0.5):
        self.eta0 = check_positive(eta0, "eta0", strict=False)
        if not 0 < rate < 1:
            raise ValueError(f"decay rate must lie in (0, 1), got {rate!r}")
        self.rate = float(rate)

    def __call__(self, t):
        return self.eta0 * np.power(self.rate, np.asarray(t, dtype=float))

    def to_dict(self):
        return {"kind": self.kind, "eta0": self.eta0, "rate": self.rate}


class ConstantSchedule:
    """``eta_t = eta`` for every round."""

    kind = "constant"

    def __init__(self, eta=0.0):
        self.eta = check_positive(eta, "eta", strict=False)

    def __call__(self, t):
        return np.full(np.shape(t), self.eta) if np.ndim(t) else self.eta

    def to_dict(self):
        return {"kind": self.kind, "eta": self.eta}


_SCHEDULES = {cls.kind: cls for cls in (PowerSchedule, ExponentialSchedule, ConstantSchedule)}


def schedule_from_spec(spec):
    if callable(spec) and not isinstance(spec, dict):
        return spec
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _SCHEDULES:
        raise ValueError(f"unknown schedule kind {kind!r}; known: {sorted(_SCHEDULES)}")
    return _SCHEDULES[kind](**spec)


def _check_nonincreasing(schedule, horizon):
    values = np.asarray([float(schedule(t)) for t in range(1, horizon + 1)])
    if np.any(values < 0) or np.any(np.diff(values) > 0):
        raise ValueError("step schedule must be nonnegative and nonincreasing")
    return values


# -- losses ------------------------------------------------------------------


class QuadraticLoss:
    """``l(h; x) = 1/2 (h - x)^T Q (h - x)`` on the first ``dim`` data columns.

    ``curvature`` is a scalar, a diagonal or a symmetric positive
    semi-definite matrix.
    """

    kind = "quadratic"

    def __init__(self, dim=1, curvature=1.0):
        self.dim = check_int(dim, "dim", minimum=1)
        c = np.asarray(curvature, dtype=float)
        if c.ndim == 0:
            Q = float(c) * np.eye(self.dim)
        elif c.ndim == 1:
            Q = np.diag(check_vector(c, name="curvature", dim=self.dim))
        else:
            Q = c
        if Q.shape != (self.dim, self.dim) or not np.allclose(Q, Q.T):
            raise ValueError("curvature must be a symmetric (dim, dim) matrix")
        eig = np.linalg.eigvalsh(Q)
        if eig[0] < -1e-12:
            raise ValueError("curvature must be positive semi-definite")
        self.Q = Q
        self.beta = float(eig[-1])
        self.mu = float(max(eig[0], 0.0))

    @property
    def width(self):
        return self.dim

    @property
    def diagonal(self):
        return np.array_equal(self.Q, np.diag(np.diag(self.Q)))

    def grad(self, H, X):
        """Per-sample gradients, shape (m, n, dim)."""
        diff = np.atleast_2d(H)[:, None, :] - X[None, :, : self.dim]
        return diff @ self.Q.T

    def mean_grad(self, H, X):
        return (np.atleast_2d(H) - X[:, : self.dim].mean(axis=0)) @ self.Q.T

    def gradient_bound(self, radius):
        """Sup-norm bound on a per-sample gradient when ||h||_inf <= radius, x in [0,1]."""
        return operator_norm(self.Q, np.inf) * (radius + 1.0)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "curvature": self.Q.tolist()}


class LogisticLoss:
    """Logistic loss with an l2 penalty.

    Data columns ``0 .. dim - 1`` are features ``z``; column ``dim`` gives
    the label ``y = 1{x[dim] >= 1/2}``.
    ``l(h; x) = log(1 + exp(h.z)) - y h.z + reg/2 ||h||^2``.
    """

    kind = "logistic"

    def __init__(self, dim=1, reg=0.1):
        self.dim = check_int(dim, "dim", minimum=1)
        self.reg = check_positive(reg, "reg", strict=False)
        # features live in [0, 1]^dim, so ||z||^2 <= dim
        self.beta = self.dim / 4.0 + self.reg
        self.mu = self.reg

    @property
    def width(self):
        return self.dim + 1

    def _split(self, X):
        return X[:, : self.dim], (X[:, self.dim] >= 0.5).astype(float)

    def grad(self, H, X):
        Z, y = self._split(X)
        H = np.atleast_2d(H)
        p = 1.0 / (1.0 + np.exp(-(H @ Z.T)))
        return (p - y[None, :])[:, :, None] * Z[None, :, :] + self.reg * H[:, None, :]

    def mean_grad(self, H, X):
        return self.grad(H, X).mean(axis=1)

    def gradient_bound(self, radius):
        return 1.0 + self.reg * radius

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "reg": self.reg}


_LOSSES = {cls.kind: cls for cls in (QuadraticLoss, LogisticLoss)}


def loss_from_spec(spec):
    if isinstance(spec, (QuadraticLoss, LogisticLoss)):
        return spec
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _LOSSES:
        raise ValueError(f"unknown loss kind {kind!r}; known: {sorted(_LOSSES)}")
    return _LOSSES[kind](**spec)


# -- encoding and queries ----------------------------------------------------


def encode_gradient(g, G):
    """Map gradients to ``[g+ / G, g- / G]`` along the last axis, clipped to [0, 1]."""
    g = np.asarray(g, dtype=float)
    pos = np.clip(g / G, 0.0, 1.0)
    neg = np.clip(-g / G, 0.0, 1.0)
    return np.concatenate([pos, neg], axis=-1)


def decode_gradient(a, G):
    a = np.asarray(a, dtype=float)
    d = a.shape[-1] // 2
    return G * (a[..., :d] - a[..., d:])


class GradientQuery(QueryFn):
    """Per-sample gradient at weights ``h``, encoded into [0, 1]^(2 dim)."""

    family = "gradient"

    def __init__(self, loss, h, G):
        self.loss = loss
        self.h = check_vector(h, name="h", dim=loss.dim)
        self.G = check_positive(G, "G")

    @property
    def d_q(self):
        return 2 * self.loss.dim

    def params(self):
        return {"loss": self.loss.to_dict(), "h": self.h, "G": self.G}

    def _evaluate(self, points):
        return encode_gradient(self.loss.grad(self.h, points)[0], self.G)

    def expectation(self, dist):
        loss = self.loss
        if not isinstance(loss, QuadraticLoss) or not loss.diagonal:
            raise NotImplementedError("closed-form gradient means need a diagonal quadratic loss")
        q = np.diag(loss.Q)
        reach = np.maximum(np.abs(self.h), np.abs(self.h - 1.0))
        if np.any(q * reach > self.G):
            raise NotImplementedError("gradient bound G is exceeded; encoding clips")
        # E[(h - X)+] is the partial expectation E[(c - X)+] at c = h
        below = np.array([dist.cdf_integral(i, float(self.h[i])) for i in range(loss.dim)])
        mean = np.array([dist.coordinate_mean(i) for i in range(loss.dim)])
        above = below - self.h + mean
        return np.concatenate([q * below, q * above]) / self.G


# -- single steps --------------------------------------------------------------


def gd_step_a(h, grad, t, schedule, delta=None):
    """``h - eta_t * grad``, landing on the grid when ``delta`` is given."""
    t = check_int(t, "t", minimum=1)
    schedule = schedule_from_spec(schedule)
    _check_nonincreasing(schedule, t + 1)
    out = check_vector(h, name="h") - float(schedule(t)) * check_vector(grad, name="grad")
    return out if delta is None else quantize(out, delta).point


def _check_step(eta, beta, mu):
    bound = 2.0 / (beta + mu)
    if eta > bound * (1 + 1e-12):
        raise ValueError(f"step {eta!r} exceeds 2 / (beta + mu) = {bound!r}")


def gd_contraction_bound(eta, beta, mu):
    """Contraction factor ``1 - eta beta mu / (beta + mu)`` of a constant-step GD update."""
    _check_step(eta, beta, mu)
    if beta + mu == 0:
        return 1.0
    return 1.0 - eta * beta * mu / (beta + mu)


def gd_step_b(h, grad, eta, loss):
    """``h - eta * grad`` for a constant step admissible for ``loss``."""
    eta = check_positive(eta, "eta")
    _check_step(eta, loss.beta, loss.mu)
    return check_vector(h, name="h") - eta * check_vector(grad, name="grad")


# -- analysts -----------------------------------------------------------------


class _GradientAnalyst(Analyst):
    family = None

    @property
    def d(self):
        return self.loss.dim

    @property
    def d_q(self):
        return 2 * self.loss.dim

    @property
    def width(self):
        return self.loss.width

    def _encoding_matrix_norm(self):
        d = self.d
        return operator_norm(np.hstack([np.eye(d), -np.eye(d)]), self.norm_)

    def _declare_gradient(self):
        if not hasattr(self.loss, "grad"):
            raise ValueError("loss must provide per-sample gradients")
        self.G_ = float(self.G) if self.G is not None else self.loss.gradient_bound(self.radius)
        check_positive(self.G_, "G")

    def query(self, t, h):
        self._ensure_fitted()
        return GradientQuery(self.loss, h, self.G_)

    def empirical_answers(self, ts, S, points, chunk=64):
        self._ensure_fitted()
        H = self.to_real(S)
        out = np.empty((H.shape[0], self.d_q))
        for lo in range(0, H.shape[0], chunk):
            g = self.loss.grad(H[lo : lo + chunk], points)
            out[lo : lo + chunk] = encode_gradient(g, self.G_).mean(axis=1)
        return out


class TypeAGradientAnalyst(_GradientAnalyst):
    """Gradient descent whose answer sensitivity decays as ``eta_t``.

    ``psi_t(h, a) = h - (eta_t / ||M||) (a+ - a-)``, where ``M = [I, -I]``;
    the map is exactly ``eta_t``-Lipschitz in the answer. The default
    dead-zone landing moves only by whole grid steps, so once
    ``eta_t * C1 < delta`` the state no longer moves at all.

    Parameters
    ----------
    loss : QuadraticLoss or LogisticLoss
    schedule : callable or dict
        Nonincreasing ``t -> eta_t`` tending to 0.
    G : float, optional
        Gradient bound for the encoding; derived from ``radius`` when omitted.
    radius : float
        Sup-norm bound on the weights used to derive ``G``.
    """

    family = "gd_type_a"
    klass = "conservative_a"

    def __init__(self, loss, schedule, *, G=None, radius=1.0, delta=None, norm=2,
                 landing="deadzone"):
        self.loss = loss
        self.schedule = schedule
        self.G = G
        self.radius = radius
        self.delta = delta
        self.norm = norm
        self.landing = landing

    def _declare(self):
        self._declare_gradient()
        self.schedule_ = schedule_from_spec(self.schedule)
        _check_nonincreasing(self.schedule_, 64)
        if isinstance(self.schedule_, ConstantSchedule) and self.schedule_.eta > 0:
            raise ValueError("a type A schedule must tend to 0")
        self.scale_ = 1.0 / self._encoding_matrix_norm()
        return {"radius": float(self.radius)}

    def eta(self, t):
        """Declared answer-Lipschitz constant at round ``t``."""
        self._ensure_fitted()
        return float(self.schedule_(t))

    def _psi(self, ts, H, A):
        eta = np.asarray(self.schedule_(ts), dtype=float).reshape(-1, 1)
        d = self.d
        return H - eta * self.scale_ * (A[:, :d] - A[:, d:])


class TypeBGradientAnalyst(_GradientAnalyst):
    """Constant-step gradient descent: ``psi(h, a) = h - eta G (a+ - a-)``.

    This is linear with ``A_t = I`` and ``B_t = -eta G [I, -I]``. The declared
    contraction under empirical answers is ``||I - eta Q||`` for quadratic
    losses (exact) and ``1 - eta beta mu / (beta + mu)`` otherwise; the
    latter is always available as ``gd_bound_``.
    """

    family = "gd_type_b"
    klass = "conservative_b"

    def __init__(self, loss, eta=0.5, *, G=None, radius=10.0, delta=None, norm=2,
                 landing="round"):
        self.loss = loss
        self.eta = eta
        self.G = G
        self.radius = radius
        self.delta = delta
        self.norm = norm
        self.landing = landing

    def _declare(self):
        check_positive(self.eta, "eta")
        check_positive(self.radius, "radius")
        self._declare_gradient()
        self.gd_bound_ = gd_contraction_bound(self.eta, self.loss.beta, self.loss.mu)
        if isinstance(self.loss, QuadraticLoss):
            lam = operator_norm(np.eye(self.d) - self.eta * self.loss.Q, self.norm_)
        else:
            lam = self.gd_bound_
        if not lam < 1:
            raise ValueError(f"update does not contract (factor {lam:.6g}); add regularization")
        return {
            "contraction": float(lam),
            "lipschitz": float(self.eta * self.G_ * self._encoding_matrix_norm()),
            "radius": float(self.radius),
        }

    def noise_map(self, t):
        """B_t = -eta G [I, -I]."""
        self._ensure_fitted()
        d = self.d
        return -self.eta * self.G_ * np.hstack([np.eye(d), -np.eye(d)])

    def _psi(self, ts, H, A):
        return H - self.eta * decode_gradient(A, self.G_)


def lambda_min(B):
    """Smallest eigenvalue of the symmetric part of a square ``B_t``."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != B.shape[1]:
        raise ValueError(f"B_t must be square to be definite, got shape {B.shape}")
    return float(np.linalg.eigvalsh(0.5 * (B + B.T))[0])


def eta_for_contraction(lam, curvature=1.0):
    """Step giving exact contraction ``lam`` on an isotropic quadratic."""
    if not 0 <= lam < 1:
        raise ValueError(f"lam must lie in [0, 1), got {lam!r}")
    return (1.0 - lam) / check_positive(curvature, "curvature")
