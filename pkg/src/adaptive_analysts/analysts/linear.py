"""Linear and stable-recurrent analysts."""

import numpy as np
from scipy.stats import ortho_group

from .._validation import as_rng, check_int, check_positive
from ..core import NormSpec, operator_norm
from .base import Analyst, FixedQueryMap, ThresholdQueryMap, check_query_map, row_matmul

__all__ = ["LinearAnalyst", "StableRNNAnalyst", "random_linear_analyst"]

_KLASSES = ("progressive", "conservative_b")


def _stack(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 2:
        M = M[None]
    if M.ndim != 3:
        raise ValueError(f"{name} must be a matrix or a stack of matrices")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite values")
    return M


class LinearAnalyst(Analyst):
    """``h_{t+1} = A_t h_t + B_t a_t`` with queries from a state-driven map.

    Parameters
    ----------
    A : array of shape (d, d) or (T, d, d)
        State matrix; a stack is cycled through as ``A[(t - 1) % T]``.
    B : array of shape (d, d_q) or (T, d, d_q)
    query_map : object, optional
        Provides ``query(t, h)`` and ``batched_means(ts, H, points)``. Defaults
        to fixed thresholds at 1/2 on the first ``d_q`` data columns.
    klass : {"progressive", "conservative_b"}
        Progressive analysts declare lambda = max ||A_t|| and L = max ||B_t||.
        Type B analysts must have ||A_t|| <= 1 and declare ``contraction``
        (under empirical answers) and ``radius`` themselves.
    contraction, radius : float, optional
        Declarations for type B.
    delta : float or None
        Grid resolution; ``None`` runs in continuous mode.
    norm : {1, 2, inf}
    """

    family = "linear"

    def __init__(self, A, B, query_map=None, *, klass="progressive", contraction=None,
                 radius=None, delta=None, norm=2, landing="round"):
        self.A = A
        self.B = B
        self.query_map = query_map
        self.klass = klass
        self.contraction = contraction
        self.radius = radius
        self.delta = delta
        self.norm = norm
        self.landing = landing

    @property
    def d(self):
        return np.shape(self.A)[-1]

    @property
    def d_q(self):
        return np.shape(self.B)[-1]

    @property
    def width(self):
        return self._query_map().width

    def _query_map(self):
        if self.query_map is not None:
            return self.query_map
        return ThresholdQueryMap(np.zeros((self.d_q, self.d)))

    def _declare(self):
        if self.klass not in _KLASSES:
            raise ValueError(f"klass must be one of {_KLASSES}, got {self.klass!r}")
        self.A_ = _stack(self.A, "A")
        self.B_ = _stack(self.B, "B")
        d = self.A_.shape[-1]
        if self.A_.shape[1:] != (d, d) or self.B_.shape[1] != d:
            raise ValueError("A must be square and B must have d rows")
        self.query_map_ = check_query_map(self._query_map(), self.d_q)
        a_norm = max(operator_norm(M, self.norm_) for M in self.A_)
        b_norm = max(operator_norm(M, self.norm_) for M in self.B_)
        if self.klass == "progressive":
            return {"contraction": a_norm, "lipschitz": b_norm, "radius": self.radius}
        if a_norm > 1 + 1e-12:
            raise ValueError(f"type B analysts need ||A_t|| <= 1, got {a_norm:.6g}")
        if self.contraction is None or self.radius is None:
            raise ValueError("type B analysts must declare contraction and radius")
        return {
            "contraction": float(self.contraction),
            "lipschitz": b_norm,
            "radius": check_positive(self.radius, "radius"),
        }

    def _psi(self, ts, H, A):
        idx_a = (ts - 1) % self.A_.shape[0]
        idx_b = (ts - 1) % self.B_.shape[0]
        if self.A_.shape[0] == 1 and self.B_.shape[0] == 1:
            return row_matmul(H, self.A_[0]) + row_matmul(A, self.B_[0])
        return np.einsum("mij,mj->mi", self.A_[idx_a], H) + np.einsum(
            "mij,mj->mi", self.B_[idx_b], A
        )

    def noise_map(self, t):
        """B_t, the matrix through which answer noise enters the state."""
        self._ensure_fitted()
        return self.B_[(t - 1) % self.B_.shape[0]]

    def query(self, t, h):
        self._ensure_fitted()
        return self.query_map_.query(t, np.asarray(h, dtype=float)[None])

    def empirical_answers(self, ts, S, points):
        self._ensure_fitted()
        return self.query_map_.batched_means(ts, self.to_real(S), points)


class StableRNNAnalyst(Analyst):
    """``h_{t+1} = tanh(W h_t + U a_t)``; tanh is 1-Lipschitz and fixes 0.

    The declared contraction is ||W|| and the answer constant ||U||.
    """

    family = "stable_rnn"
    klass = "progressive"

    def __init__(self, W, U, query_map=None, *, delta=None, norm=2, landing="round"):
        self.W = W
        self.U = U
        self.query_map = query_map
        self.delta = delta
        self.norm = norm
        self.landing = landing

    @property
    def d(self):
        return np.shape(self.W)[0]

    @property
    def d_q(self):
        return np.shape(self.U)[1]

    @property
    def width(self):
        return self.query_map_.width if hasattr(self, "query_map_") else None

    def _declare(self):
        self.W_ = np.asarray(self.W, dtype=float)
        self.U_ = np.asarray(self.U, dtype=float)
        if self.W_.shape != (self.d, self.d) or self.U_.shape[0] != self.d:
            raise ValueError("W must be (d, d) and U must be (d, d_q)")
        qm = self.query_map or ThresholdQueryMap(np.zeros((self.d_q, self.d)))
        self.query_map_ = check_query_map(qm, self.d_q)
        lam = operator_norm(self.W_, self.norm_)
        if lam >= 1:
            raise ValueError(f"recurrent matrix must satisfy ||W|| < 1, got {lam:.6g}")
        return {"contraction": lam, "lipschitz": operator_norm(self.U_, self.norm_)}

    def _psi(self, ts, H, A):
        return np.tanh(row_matmul(H, self.W_) + row_matmul(A, self.U_))

    def query(self, t, h):
        self._ensure_fitted()
        return self.query_map_.query(t, np.asarray(h, dtype=float)[None])

    def empirical_answers(self, ts, S, points):
        self._ensure_fitted()
        return self.query_map_.batched_means(ts, self.to_real(S), points)


def _contraction_matrix(d, lam, norm, rng):
    # orthogonal for l2, signed permutation otherwise: both have norm exactly lam
    if norm.p == 2 and d > 1:
        Q = ortho_group.rvs(d, random_state=rng)
    else:
        Q = np.eye(d)[rng.permutation(d)] * rng.choice([-1.0, 1.0], size=d)[:, None]
    return lam * Q


def random_linear_analyst(d, d_q, lam, L=1.0, *, delta=None, norm=2, adaptivity=1.0,
                          random_state=None, landing="round"):
    """Draw a progressive linear analyst with ||A|| = lam and ||B|| = L exactly.

    Queries are threshold queries on data columns ``0 .. d_q - 1`` whose cut
    points move with the state through a random matrix scaled by
    ``adaptivity`` (0 gives a non-adaptive analyst).
    """
    d = check_int(d, "d", minimum=1)
    d_q = check_int(d_q, "d_q", minimum=1)
    if not 0 <= lam < 1:
        raise ValueError(f"lam must lie in [0, 1), got {lam!r}")
    L = check_positive(L, "L", strict=False)
    spec = NormSpec.coerce(norm)
    rng = as_rng(random_state)
    A = _contraction_matrix(d, lam, spec, rng)
    B = rng.standard_normal((d, d_q))
    B *= L / operator_norm(B, spec) if L > 0 else 0.0
    W = rng.standard_normal((d_q, d))
    W *= adaptivity / max(operator_norm(W, spec), 1e-300)
    qm = ThresholdQueryMap(W) if adaptivity else FixedQueryMap(
        ThresholdQueryMap(np.zeros((d_q, d))).query(1, np.zeros((1, d)))
    )
    return LinearAnalyst(A, B, qm, delta=delta, norm=norm, landing=landing).fit()
