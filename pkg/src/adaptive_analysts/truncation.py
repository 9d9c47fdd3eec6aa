"""Truncated analysts and their comparison with the full analyst.

Three constructions are supported:

* ``progressive_last_k``: zero the state ``k`` rounds back and replay the
  full analyst's recorded answers (passive).
* ``conservative_a_first_k``: feed the recorded answers of rounds ``<= k``,
  then zero answers.
* ``conservative_b_last_k``: zero the state ``k`` rounds back and re-run
  interactively, issuing the truncated analyst's own queries to the mechanism
  but reusing the recorded noise draws.

Trajectories are native-state arrays indexed by ``t - 1`` for ``t = 1 .. T+1``.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import clone

from ._validation import check_int
from .core import NormSpec
from .distributions import sample_dataset
from .privacy import depth_conservative_a, depth_conservative_b, depth_progressive
from .session import interact
from .transcript import Transcript

__all__ = [
    "TruncationMode",
    "truncated_replay",
    "truncated_states",
    "closeness_gap",
    "class_bound",
    "identity_depth",
    "identity_depth_check",
    "answer_independent",
]

MODES = {
    "progressive_last_k": "progressive",
    "conservative_a_first_k": "conservative_a",
    "conservative_b_last_k": "conservative_b",
}


@dataclass(frozen=True)
class TruncationMode:
    kind: str
    k: int

    def __post_init__(self):
        if self.kind not in MODES:
            raise ValueError(f"unknown truncation mode {self.kind!r}; known: {sorted(MODES)}")
        check_int(self.k, "k", minimum=1)

    @classmethod
    def for_analyst(cls, analyst, k):
        kind = {v: key for key, v in MODES.items()}.get(analyst.klass)
        if kind is None:
            raise ValueError(f"no truncation construction for {analyst.klass!r} analysts")
        return cls(kind, k)

    def to_dict(self):
        return {"kind": self.kind, "k": self.k}


def _answers(full):
    if isinstance(full, Transcript):
        return np.array([r.answer for r in full.rounds]).reshape(len(full), -1)
    return np.atleast_2d(np.asarray(full, dtype=float))


def _noise(full, T, d_q):
    if isinstance(full, Transcript):
        rows = [r.noise for r in full.rounds]
        if any(x is None for x in rows):
            return None
        return np.array(rows).reshape(T, d_q)
    return None


def _replay_last_k(analyst, ks, ts, answer_fn):
    ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
    ts = np.atleast_1d(np.asarray(ts, dtype=np.int64))
    if ks.min() < 1 or ts.min() < 1:
        raise ValueError("k and t must be >= 1")
    K, Tt = (a.ravel() for a in np.meshgrid(ks, ts, indexing="ij"))
    S = analyst.zero_states(K.shape[0])
    kmax = int(K.max())
    first = np.maximum(Tt - K, 1)
    for j in range(kmax):
        idx = Tt - kmax + j
        rows = np.flatnonzero(idx >= first)
        if rows.size == 0:
            continue
        A = answer_fn(idx[rows], S[rows])
        S[rows] = analyst.advance(idx[rows], S[rows], A)
    return S.reshape(ks.shape[0], ts.shape[0], analyst.d)


def truncated_states(analyst, full, ks, ts, *, mode="progressive_last_k", mechanism=None):
    """h_t^k for every ``k`` in ``ks`` and ``t`` in ``ts``; shape (len(ks), len(ts), d).

    ``full`` is a Transcript or an answer array of shape (T, d_q); states are
    defined for ``t <= T + 1``.
    """
    analyst._ensure_fitted()
    answers = _answers(full)
    T = answers.shape[0]
    ts = np.atleast_1d(np.asarray(ts, dtype=np.int64))
    if ts.max() > T + 1:
        raise ValueError(f"states are defined up to t = {T + 1}, asked for {ts.max()}")
    if mode == "progressive_last_k":
        return _replay_last_k(analyst, ks, ts, lambda idx, S: answers[idx - 1])
    if mode == "conservative_b_last_k":
        if mechanism is None:
            raise ValueError("interactive replay needs the fitted mechanism")
        noise = _noise(full, T, analyst.d_q)
        if mechanism.noisy and noise is None:
            raise ValueError("interactive replay needs the recorded noise of every round")
        if noise is None:
            noise = np.zeros_like(answers)
        points = mechanism.dataset_.points

        def respond(idx, S):
            emp = analyst.empirical_answers(idx, S, points)
            return mechanism._respond(emp, noise[idx - 1])

        return _replay_last_k(analyst, ks, ts, respond)
    if mode == "conservative_a_first_k":
        out = np.empty((len(np.atleast_1d(ks)), ts.shape[0], analyst.d), dtype=analyst.zero_states().dtype)
        for i, k in enumerate(np.atleast_1d(ks)):
            masked = answers.copy()
            masked[int(k):] = 0.0
            out[i] = analyst.transform(masked)[ts - 1]
        return out
    raise ValueError(f"unknown truncation mode {mode!r}")


def truncated_replay(full, analyst, mode, mechanism=None):
    """Trajectory h_1^k .. h_{T+1}^k of the truncated analyst.

    Parameters
    ----------
    full : Transcript
    analyst : Analyst
    mode : TruncationMode
    mechanism : Mechanism, optional
        Required for the interactive type B replay.
    """
    if MODES[mode.kind] != analyst.klass:
        raise ValueError(f"mode {mode.kind!r} does not apply to {analyst.klass!r} analysts")
    T = len(full) if isinstance(full, Transcript) else _answers(full).shape[0]
    ts = np.arange(1, T + 2)
    return truncated_states(analyst, full, [mode.k], ts, mode=mode.kind, mechanism=mechanism)[0]


def closeness_gap(full, trunc, t, norm=None, delta=None):
    """``||h_t - h_t^k||`` from two trajectories indexed by ``t - 1``.

    Integer (grid) trajectories are differenced exactly before scaling by
    ``delta``.
    """
    full, trunc = np.asarray(full), np.asarray(trunc)
    t = check_int(int(t), "t", minimum=1)
    if t > min(full.shape[0], trunc.shape[0]):
        raise ValueError(f"round {t} is outside the recorded trajectories")
    diff = full[t - 1] - trunc[t - 1]
    if np.issubdtype(diff.dtype, np.integer):
        if delta is None:
            raise ValueError("grid trajectories need the resolution delta")
        return NormSpec.coerce(norm).norm(diff) * delta
    return NormSpec.coerce(norm).norm(diff)


def class_bound(analyst, k):
    """Closeness bound at depth ``k`` for the analyst's class.

    ``lam^k L C1 / (1 - lam)`` for progressive analysts and ``lam^k D`` for
    type B analysts.
    """
    analyst._ensure_fitted()
    lam = analyst.contraction_
    if analyst.klass == "progressive":
        return lam**k * analyst.lipschitz_ * analyst.c1_ / (1 - lam)
    if analyst.klass == "conservative_b":
        return lam**k * analyst.radius_
    raise ValueError(f"no closed-form closeness bound for {analyst.klass!r} analysts")


def identity_depth(analyst, t_max=10_000):
    """Depth from the matching formula for the analyst's class (grid mode)."""
    analyst._ensure_fitted()
    if not analyst.grid:
        raise ValueError("identity depths are defined on a grid")
    if analyst.klass == "progressive":
        return depth_progressive(analyst.contraction_, analyst.lipschitz_, analyst.c1_,
                                 analyst.delta)
    if analyst.klass == "conservative_a":
        return depth_conservative_a(analyst.eta, analyst.delta, analyst.c1_, t_max)
    if analyst.klass == "conservative_b":
        return depth_conservative_b(analyst.contraction_, analyst.radius_, analyst.delta)
    raise ValueError(f"no depth formula for {analyst.klass!r} analysts")


def answer_independent(analyst, S, t, candidates):
    """True if ``psi_t(h, a)`` lands on the same grid state for every candidate answer."""
    S = np.asarray(S)[None]
    cands = np.atleast_2d(np.asarray(candidates, dtype=float))
    nxt = analyst.advance(np.full(cands.shape[0], t), np.repeat(S, cands.shape[0], axis=0), cands)
    return bool(np.all(nxt == nxt[0]))


def identity_depth_check(analyst, mechanism, distribution, n, t_max, seeds, *, k=None,
                         max_examples=20):
    """Check ``h_t^k == h_t`` (integer-exact) and ``q_t^k == q_t`` at the formula depth.

    Parameters
    ----------
    analyst : Analyst or callable
        A grid analyst, or ``seed -> Analyst`` to draw one per seed.
    mechanism : Mechanism
        Unfitted template; cloned and fitted per seed with that seed.
    distribution : Distribution
    n, t_max : int
    seeds : iterable of int
    k : int, optional
        Override the formula depth.

    Returns
    -------
    dict
        Counterexamples carry the seed, round and both states.
    """
    report = {"t_max": t_max, "seeds": list(seeds), "n_checked": 0, "n_violations": 0,
              "n_query_mismatches": 0, "examples": []}
    for seed in seeds:
        an = analyst(seed) if callable(analyst) and not hasattr(analyst, "advance") else analyst
        an._ensure_fitted()
        depth = identity_depth(an, t_max)
        depth_k = int(k) if k is not None else depth.k_int
        report.setdefault("k", depth_k)
        report.setdefault("depth", depth.to_dict())
        data = sample_dataset(distribution, n, seed)
        mech = clone(mechanism).set_params(random_state=seed).fit(data)
        sess = interact(an, mech, t_max)
        mode = TruncationMode.for_analyst(an, depth_k)
        trunc = truncated_replay(sess.transcript, an, mode, mechanism=mech)
        same = np.all(trunc == sess.states, axis=1)
        report["n_checked"] += same.shape[0]
        report["n_violations"] += int((~same).sum())
        for t in range(1, t_max + 1):
            full_id = sess.transcript[t - 1].query_id
            if same[t - 1]:
                continue
            trunc_id = an.query(t, an.to_real(trunc[t - 1])).id
            report["n_query_mismatches"] += int(trunc_id != full_id)
        for t in np.flatnonzero(~same)[: max(0, max_examples - len(report["examples"]))] + 1:
            report["examples"].append({
                "seed": seed, "t": int(t),
                "full": sess.states[t - 1].tolist(), "truncated": trunc[t - 1].tolist(),
            })
    report["passed"] = report["n_violations"] == 0 and report["n_query_mismatches"] == 0
    return report
