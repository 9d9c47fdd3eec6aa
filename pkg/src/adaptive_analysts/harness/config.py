"""Experiment configuration and spec -> object builders."""

import copy
import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import ortho_group

from .._validation import as_rng
from ..analysts import (
    BellmanAnalyst,
    FixedQueryMap,
    LinearAnalyst,
    StableRNNAnalyst,
    ThresholdQueryMap,
    TypeAGradientAnalyst,
    TypeBGradientAnalyst,
    loss_from_spec,
    random_linear_analyst,
)
from ..core import NormSpec, operator_norm
from ..distributions import distribution_from_dict
from ..mechanisms import mechanism_from_dict
from ..queries import ConstantQuery, CoordinateQuery, ThresholdQuery, VoteQuery

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "analyst_from_spec",
    "query_from_spec",
    "random_type_b_analyst",
]

VERSION = 1


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configurations."""


_QUERIES = {
    "constant": lambda p: ConstantQuery(p["values"]),
    "coordinate": lambda p: CoordinateQuery(p["indices"]),
    "threshold": lambda p: ThresholdQuery(p["coords"], p["thresholds"]),
    "vote": lambda p: VoteQuery(p["weights"], p.get("threshold", 0)),
}


def query_from_spec(spec):
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in _QUERIES:
        raise ConfigError(f"unknown query family {family!r}; known: {sorted(_QUERIES)}")
    return _QUERIES[family](spec)


def _query_map(spec, d, d_q):
    if spec is None:
        return None
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "fixed":
        return FixedQueryMap(query_from_spec(spec["query"]))
    if kind == "threshold":
        W = spec.get("W", np.zeros((d_q, d)))
        return ThresholdQueryMap(W, spec.get("coords"), spec.get("offset", 0.5))
    raise ConfigError(f"unknown query map kind {kind!r}")


def random_type_b_analyst(d, lam, *, radius=10.0, b_scale=1.0, delta=None, norm=2,
                          random_state=None):
    """Linear type B analyst ``h' = A h + B a`` with fixed coordinate queries.

    ``A = lam * Q`` for a random orthogonal ``Q`` and ``B`` is symmetric
    positive definite with eigenvalues in ``[b_scale, 2 b_scale]``. The queries
    do not depend on the state, so the contraction under empirical answers is
    exactly ``lam`` in the l2 norm.
    """
    rng = as_rng(random_state)
    Q = ortho_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))
    V = ortho_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))
    B = V @ np.diag(b_scale * (1.0 + rng.random(d))) @ V.T
    B = 0.5 * (B + B.T)
    qm = FixedQueryMap(CoordinateQuery(list(range(d))))
    lam_decl = operator_norm(lam * Q, NormSpec.coerce(norm))
    return LinearAnalyst(lam * Q, B, qm, klass="conservative_b", contraction=lam_decl,
                         radius=radius, delta=delta, norm=norm).fit()


def analyst_from_spec(spec, *, delta=None, norm=2, seed=None):
    """Build an analyst from its JSON description.

    ``spec["family"]`` selects the builder; ``delta`` and ``norm`` default to
    the experiment-level values unless the description overrides them.
    """
    spec = copy.deepcopy(dict(spec))
    family = spec.pop("family", None)
    delta = spec.pop("delta", delta)
    norm = spec.pop("norm", norm)
    common = {"delta": delta, "norm": norm}
    try:
        if family == "random_linear":
            return random_linear_analyst(spec.pop("d"), spec.pop("d_q"), spec.pop("lam"),
                                         spec.pop("L", 1.0), random_state=seed, **common,
                                         **spec)
        if family == "random_type_b":
            return random_type_b_analyst(spec.pop("d"), spec.pop("lam"), random_state=seed,
                                         **common, **spec)
        if family == "linear":
            A, B = np.asarray(spec.pop("A"), float), np.asarray(spec.pop("B"), float)
            qm = _query_map(spec.pop("query_map", None), A.shape[-1], B.shape[-1])
            return LinearAnalyst(A, B, qm, **common, **spec).fit()
        if family == "fixed":
            q = query_from_spec(spec.pop("query"))
            d = spec.pop("d", 1)
            return LinearAnalyst(np.zeros((d, d)), np.zeros((d, q.d_q)), FixedQueryMap(q),
                                 **common).fit()
        if family == "stable_rnn":
            W, U = np.asarray(spec.pop("W"), float), np.asarray(spec.pop("U"), float)
            qm = _query_map(spec.pop("query_map", None), W.shape[0], U.shape[1])
            return StableRNNAnalyst(W, U, qm, **common).fit()
        if family == "bellman":
            return BellmanAnalyst(np.asarray(spec.pop("transitions"), float),
                                  spec.pop("gamma", 0.9), delta=delta,
                                  norm=spec.pop("norm", "inf")).fit()
        if family == "gd_type_a":
            loss = loss_from_spec(spec.pop("loss"))
            return TypeAGradientAnalyst(loss, spec.pop("schedule"), **common, **spec).fit()
        if family == "gd_type_b":
            loss = loss_from_spec(spec.pop("loss"))
            return TypeBGradientAnalyst(loss, spec.pop("eta"), **common, **spec).fit()
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad parameters for analyst family {family!r}: {exc}") from exc
    raise ConfigError(f"unknown analyst family {family!r}")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a session or a sweep.

    ``sweep`` maps dotted field paths (``"t"``, ``"analyst.lam"``, ...) to
    lists of values; :meth:`points` expands their cross product.
    """

    distribution: dict
    analyst: dict
    mechanism: dict
    n: int = 1000
    t: int = 100
    norm: object = 2
    delta: float = None
    seeds: list = field(default_factory=lambda: [0])
    sweep: dict = field(default_factory=dict)
    envelope_multiplier: float = 1.0
    accuracy_epsilon: float = 0.1
    mc_samples: int = None
    out: dict = field(default_factory=dict)
    version: int = VERSION

    def __post_init__(self):
        if self.version != VERSION:
            raise ConfigError(f"unsupported config version {self.version!r}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.t, int) or self.t < 0:
            raise ConfigError(f"t must be a nonnegative integer, got {self.t!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for axis, values in self.sweep.items():
            if not isinstance(values, list) or not values:
                raise ConfigError(f"sweep axis {axis!r} needs a nonempty list of values")
        try:
            NormSpec.coerce(self.norm)
            distribution_from_dict(self.distribution)
            mechanism_from_dict(self.mechanism)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if "family" not in self.analyst:
            raise ConfigError("analyst spec needs a 'family'")

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self):
        return asdict(self)

    @property
    def hash(self):
        doc = self.to_dict()
        doc.pop("out", None)
        payload = json.dumps(doc, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @property
    def size(self):
        return int(np.prod([len(v) for v in self.sweep.values()])) if self.sweep else 1

    def with_value(self, path, value):
        doc = self.to_dict()
        doc["sweep"] = {}
        node = doc
        keys = path.split(".")
        for key in keys[:-1]:
            if key not in node or not isinstance(node[key], dict):
                raise ConfigError(f"sweep path {path!r} does not name a config field")
            node = node[key]
        node[keys[-1]] = value
        return ExperimentConfig.from_dict(doc)

    def points(self):
        """Cross product of sweep axes as (assignment, config) pairs, in axis order."""
        if not self.sweep:
            return [({}, self)]
        axes = list(self.sweep)
        out = []
        for combo in itertools.product(*(self.sweep[a] for a in axes)):
            cfg = self
            for axis, value in zip(axes, combo):
                cfg = cfg.with_value(axis, value)
            out.append((dict(zip(axes, combo)), cfg))
        return out

    def build_analyst(self, seed):
        return analyst_from_spec(self.analyst, delta=self.delta, norm=self.norm, seed=seed)

    def build_distribution(self):
        return distribution_from_dict(self.distribution)

    def build_mechanism(self, seed):
        spec = dict(self.mechanism)
        spec.setdefault("random_state", seed)
        return mechanism_from_dict(spec)
