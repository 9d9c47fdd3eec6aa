"""Grid-quantized states and norm utilities.

Hidden states on the grid are stored as integer multiples of the resolution
``delta``; every equality test between grid states is an integer comparison.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_positive, check_vector

__all__ = [
    "NormSpec",
    "GridState",
    "quantize",
    "lp_distance",
    "ones_norm",
    "operator_norm",
]

_MAX_GRID_INDEX = 2.0**62


@dataclass(frozen=True)
class NormSpec:
    """Selects the l_p norm (p in {1, 2, inf}) used by contraction statements."""

    p: float = 2

    def __post_init__(self):
        p = self.p
        if isinstance(p, str):
            p = {"1": 1, "2": 2, "inf": np.inf, "infinity": np.inf}.get(p.lower())
        if p not in (1, 2, np.inf):
            raise ValueError(f"norm order must be one of 1, 2, inf; got {self.p!r}")
        object.__setattr__(self, "p", float(p) if p != np.inf else np.inf)

    def norm(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x.ravel(), ord=self.p))

    def norms(self, X):
        """Row-wise norms of a 2-d array."""
        return np.linalg.norm(np.asarray(X, dtype=float), ord=self.p, axis=1)

    def to_json(self):
        return "inf" if self.p == np.inf else int(self.p)

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        return cls(2 if value is None else value)


@dataclass(frozen=True, eq=False)
class GridState:
    """A point ``coords * delta`` on the resolution-``delta`` integer grid."""

    coords: np.ndarray
    delta: float
    _key: tuple = field(init=False, repr=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.int64).reshape(-1)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "delta", check_positive(self.delta, "delta"))
        object.__setattr__(self, "_key", (self.delta, coords.tobytes()))

    @classmethod
    def zeros(cls, d, delta):
        return cls(np.zeros(check_int(d, "d", minimum=1), dtype=np.int64), delta)

    @property
    def dim(self):
        return self.coords.shape[0]

    @property
    def point(self):
        """The represented real vector."""
        return self.coords * self.delta

    def __eq__(self, other):
        if not isinstance(other, GridState):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"GridState(coords={self.coords.tolist()}, delta={self.delta!r})"


def quantize(v, delta):
    """Round ``v`` coordinate-wise to the nearest multiple of ``delta``.

    Exact half steps go to the even multiple.

    Parameters
    ----------
    v : array-like of shape (d,)
    delta : float
        Grid resolution, must be positive.

    Returns
    -------
    GridState
    """
    delta = check_positive(delta, "delta")
    v = check_vector(v, name="v")
    scaled = v / delta
    if np.any(np.abs(scaled) >= _MAX_GRID_INDEX):
        raise ValueError("value too large to index on the grid without overflow")
    return GridState(np.rint(scaled).astype(np.int64), delta)


def quantize_rows(V, delta):
    """Vectorised :func:`quantize` returning integer coordinates row-wise."""
    V = np.asarray(V, dtype=float)
    if not np.all(np.isfinite(V)):
        raise ValueError("non-finite values cannot be quantized")
    scaled = V / delta
    if np.any(np.abs(scaled) >= _MAX_GRID_INDEX):
        raise ValueError("value too large to index on the grid without overflow")
    return np.rint(scaled).astype(np.int64)


def lp_distance(x, y, spec=None):
    """Distance between two states (grid or real) in the chosen l_p norm.

    Grid states with a shared resolution are differenced on their integer
    coordinates before scaling, so no rounding error accumulates.
    """
    spec = NormSpec.coerce(spec)
    if isinstance(x, GridState) and isinstance(y, GridState):
        if x.delta != y.delta:
            return lp_distance(x.point, y.point, spec)
        if x.dim != y.dim:
            raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
        diff = x.coords - y.coords
        return spec.norm(diff) * x.delta
    xv = x.point if isinstance(x, GridState) else check_vector(x, name="x")
    yv = y.point if isinstance(y, GridState) else check_vector(y, name="y")
    if xv.shape != yv.shape:
        raise ValueError(f"dimension mismatch: {xv.shape[0]} vs {yv.shape[0]}")
    return spec.norm(xv - yv)


def ones_norm(d_q, spec=None):
    """Norm of the ``d_q``-dimensional all-ones vector."""
    d_q = check_int(d_q, "d_q", minimum=1)
    p = NormSpec.coerce(spec).p
    if p == 1:
        return float(d_q)
    if p == 2:
        return float(np.sqrt(d_q))
    return 1.0


def operator_norm(M, spec=None):
    """Induced l_p -> l_p operator norm of a matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    p = NormSpec.coerce(spec).p
    if p == 1:
        return float(np.abs(M).sum(axis=0).max())
    if p == np.inf:
        return float(np.abs(M).sum(axis=1).max())
    return float(np.linalg.norm(M, ord=2))
