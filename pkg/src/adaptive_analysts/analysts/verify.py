"""Empirical checks of each analyst family's defining inequalities."""

import numpy as np
from sklearn.base import clone

from .._validation import as_rng, check_int
from ..core import ones_norm, operator_norm
from ..distributions import BernoulliProduct, UniformBox
from .adversarial import InterleavingAnalyst, ReservedValueAdversary, StackingAnalyst
from .base import Analyst

__all__ = ["verify_class"]

_REL = 1e-12


def _check(name, max_ratio, bound, slack=0.0):
    passed = bool(max_ratio <= bound * (1 + _REL) + _REL + slack)
    return {"name": name, "max_ratio": float(max_ratio), "bound": float(bound),
            "slack": float(slack), "passed": passed}


def _ratios(num, den):
    keep = den > 1e-12
    return num[keep] / den[keep] if keep.any() else np.zeros(1)


def _sample_radius(an):
    if an.radius_ is not None:
        return float(an.radius_)
    lam, L = an.contraction_, an.lipschitz_
    if lam is not None and L is not None and np.isfinite(L) and lam < 1:
        return max(L * an.c1_ / (1 - lam), 1e-3)
    if lam is not None and lam < 1:
        return 1.0 / (1 - lam)
    return 1.0


def _verify_dynamic(analyst, trials, rng, dataset):
    real = clone(analyst).set_params(delta=None).fit()
    norm = real.norm_
    d, d_q = real.d, real.d_q
    R = _sample_radius(real)
    ts = rng.integers(1, 51, size=trials)
    H1 = rng.uniform(-R, R, (trials, d))
    H2 = rng.uniform(-R, R, (trials, d))
    A1 = rng.random((trials, d_q))
    A2 = rng.random((trials, d_q))
    checks = []

    zero = real._psi(np.arange(1, 6), np.zeros((5, d)), np.zeros((5, d_q)))
    checks.append(_check("psi_t(0, 0) = 0", float(np.abs(zero).max()), 0.0))

    lam = real.contraction_
    if real.klass == "progressive":
        num = norm.norms(real._psi(ts, H1, A1) - real._psi(ts, H2, A1))
        checks.append(_check("state contraction", _ratios(num, norm.norms(H1 - H2)).max(), lam))
        if real.lipschitz_ is not None and np.isfinite(real.lipschitz_):
            num = norm.norms(real._psi(ts, H1, A1) - real._psi(ts, H1, A2))
            checks.append(_check("answer Lipschitz", _ratios(num, norm.norms(A1 - A2)).max(),
                                 real.lipschitz_))
    elif real.klass == "conservative_a":
        num = norm.norms(real._psi(ts, H1, A1) - real._psi(ts, H1, A2))
        eta = np.array([real.eta(int(t)) for t in ts])
        den = norm.norms(A1 - A2) * eta
        ratio = _ratios(num, den).max() if np.any(eta > 0) else float(np.abs(num).max())
        checks.append(_check("answer Lipschitz / eta_t", ratio, 1.0))
    elif real.klass == "conservative_b":
        if hasattr(real, "A_"):
            a_norm = max(operator_norm(M, norm) for M in real.A_)
            checks.append(_check("||A_t|| <= 1", a_norm, 1.0))
        if dataset is None:
            width = real.width or d
            dataset = UniformBox.unit(width).sample(200, rng)
        points = getattr(dataset, "points", dataset)
        E1 = real.empirical_answers(ts, H1, points)
        E2 = real.empirical_answers(ts, H2, points)
        num = norm.norms(real._psi(ts, H1, E1) - real._psi(ts, H2, E2))
        checks.append(_check("contraction under empirical answers",
                             _ratios(num, norm.norms(H1 - H2)).max(), lam))

    if analyst.grid and lam is not None and real.klass != "conservative_a":
        an = analyst.fit()
        S1 = np.rint(H1 / an.delta).astype(np.int64)
        S2 = np.rint(H2 / an.delta).astype(np.int64)
        if real.klass == "conservative_b":
            E1 = an.empirical_answers(ts, S1, points)
            E2 = an.empirical_answers(ts, S2, points)
        else:
            E1 = E2 = A1
        lhs = norm.norms(an.to_real(an.advance(ts, S1, E1) - an.advance(ts, S2, E2)))
        rhs = lam * norm.norms(an.to_real(S1 - S2))
        slack = an.delta * ones_norm(d, norm)
        excess = float(np.max(lhs - rhs)) if lhs.size else 0.0
        checks.append(_check("grid contraction with quantization slack",
                             max(excess, 0.0), 0.0, slack))
    return checks


def _verify_adversary(adv, trials, rng):
    checks = []
    t = min(trials, 8)
    if isinstance(adv, StackingAnalyst):
        t = min(t, adv.t_max)
        zero = adv.step(adv.initial_state(), np.zeros(adv.d_q), 1)
        checks.append(_check("psi(0, 0) = 0", float(np.abs(zero).max()), 0.0))
        answers = rng.integers(0, 2**16, (t, adv.d_q)) / 2**16
        decoded = adv.decode_transcript(adv.run(answers), t)
        checks.append(_check("decode round trip", float(np.abs(decoded - answers).max()), 0.0))
    elif isinstance(adv, InterleavingAnalyst):
        zero = adv.step(adv.initial_state(), 0)
        checks.append(_check("psi(0, 0) = 0", float(abs(zero)), 0.0))
        t = min(t, 6)
        answers = [adv.quantize_answer(x) for x in rng.random(t)]
        decoded = adv.decode_transcript(adv.run(answers)[-1], t)
        ok = decoded == answers
        checks.append(_check("decode round trip", 0.0 if ok else 1.0, 0.0))
    elif isinstance(adv, ReservedValueAdversary):
        points = BernoulliProduct((0.5,) * adv.width).sample(50, rng)
        h, truth = 0, []
        t = min(t, adv.precision_bits // adv.bits)
        for r in range(1, t + 1):
            q = adv.query(r, h)
            truth.append(adv.true_answer(q.base, points))
            h = adv.step(h, adv.answer(q, points), r)
        ok = adv.decode_transcript(h, t) == truth
        checks.append(_check("decode round trip", 0.0 if ok else 1.0, 0.0))
    return checks


def verify_class(analyst, trials=200, seed=0, dataset=None):
    """Sample random states and answers and test the family's declared inequalities.

    Parameters
    ----------
    analyst : Analyst or adversarial analyst
    trials : int
        Random (h, h', a, a') tuples per check.
    seed : int
    dataset : Dataset or array, optional
        Used for the type B contraction under empirical answers.

    Returns
    -------
    dict
        ``checks`` lists each measured maximum ratio against its bound; the
        grid check adds the quantization slack ``delta * ||1_d||``. Violations
        are reported, never raised.
    """
    trials = check_int(trials, "trials", minimum=1)
    rng = as_rng(seed)
    if isinstance(analyst, Analyst):
        checks = _verify_dynamic(analyst, trials, rng, dataset)
    else:
        checks = _verify_adversary(analyst, trials, rng)
    return {
        "family": analyst.family,
        "klass": analyst.klass,
        "trials": trials,
        "seed": seed,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
