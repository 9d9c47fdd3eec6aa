"""The interaction loop between one analyst and one mechanism."""

import time
from dataclasses import dataclass

import numpy as np

from ._validation import check_int
from .distributions import true_mean
from .transcript import Transcript

__all__ = ["Session", "interact"]


@dataclass
class Session:
    """Outcome of :func:`interact`.

    ``states`` holds native states h_1 .. h_{T+1}; ``escapes`` counts rounds
    whose state left the analyst's declared radius.
    """

    transcript: Transcript
    states: np.ndarray
    escapes: int
    wall_time: float


def interact(analyst, mechanism, T, *, distribution=None, mc_samples=None, random_state=None,
             abort_on_escape=False):
    """Run rounds ``t = 1 .. T``: ``q_t = f_t(h_t)``, ``a_t = M(S, q_t)``,
    ``h_{t+1} = psi_t(h_t, a_t)`` starting from ``h_1 = 0``.

    Parameters
    ----------
    analyst : Analyst
    mechanism : Mechanism
        Already fitted on the dataset.
    T : int
    distribution : Distribution, optional
        When given, the true mean of every query is recorded.
    mc_samples : int, optional
        Monte-Carlo fallback for queries without closed-form means.
    abort_on_escape : bool
        Raise ``RuntimeError`` as soon as the state leaves the declared radius.
    """
    T = check_int(T, "T", minimum=0)
    analyst._ensure_fitted()
    start = time.perf_counter()
    tr = Transcript(mechanism=mechanism.to_dict(), analyst=analyst.to_dict())
    states = analyst.zero_states(T + 1)
    radius = analyst.radius_ if analyst.klass == "conservative_b" else None
    escapes = 0
    for t in range(1, T + 1):
        h = analyst.to_real(states[t - 1])
        q = analyst.query(t, h)
        if q.d_q != analyst.d_q:
            raise ValueError(f"query dimension {q.d_q} does not match analyst d_q {analyst.d_q}")
        resp = mechanism.respond(q, t)
        mu = None
        if distribution is not None:
            mu = true_mean(distribution, q, mc_samples=mc_samples, random_state=random_state)
        tr.append(t, q, resp.answer, resp.empirical, mu, resp.noise if mechanism.noisy else None)
        states[t] = analyst.advance([t], states[t - 1 : t], resp.answer[None])[0]
        if radius is not None and analyst.norm_.norm(analyst.to_real(states[t])) > radius:
            escapes += 1
            if abort_on_escape:
                raise RuntimeError(f"state left the radius-{radius} ball at round {t + 1}")
    return Session(tr, states, escapes, time.perf_counter() - start)
