"""Sessions, error measurement, scaling sweeps and attack demonstrations."""

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone

from .._validation import as_rng, check_int
from ..analysts import InterleavingAnalyst, PrecisionExhausted, ReservedValueAdversary, lambda_min
from ..distributions import BernoulliProduct, UniformBox, sample_dataset
from ..mechanisms import EmpiricalMechanism, GaussianMechanism, sample_accuracy_rate
from ..queries import CoordinateQuery, VoteQuery
from ..session import interact
from ..truncation import identity_depth
from .config import ConfigError, ExperimentConfig

__all__ = [
    "EscapeError",
    "InvariantViolation",
    "RunResult",
    "run_session",
    "generalization_error",
    "per_round_errors",
    "overfit_attack",
    "attack_sweep",
    "fit_exponent",
    "hoeffding_baseline",
    "scaling_sweep",
    "envelope",
    "sweep_to_csv",
    "counterexample_demo",
    "interleaving_demo",
    "continuous_mode_session",
    "exceedance_rate",
]

SWEEP_COLUMNS = ["point", "t", "seed", "n", "d_q", "K", "max_error", "envelope", "config_hash"]


class InvariantViolation(RuntimeError):
    """A checked identity or bound failed during a run."""


class EscapeError(InvariantViolation):
    """A type B state left its declared radius in continuous mode."""


@dataclass
class RunResult:
    """Per-round generalization errors of one session and their summary."""

    per_round_errors: np.ndarray
    max_error: float
    sample_accuracy: float
    escapes: int
    wall_time: float
    config_hash: str = None
    seed: object = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "per_round_errors": np.asarray(self.per_round_errors).tolist(),
            "max_error": self.max_error,
            "sample_accuracy": self.sample_accuracy,
            "escapes": self.escapes,
            "wall_time": self.wall_time,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "extra": self.extra,
        }


def per_round_errors(transcript):
    """``||a_i - E q_i||_inf`` for every round."""
    rows = list(transcript)
    if not rows:
        raise ValueError("empty transcript")
    if any(r.true_mean is None for r in rows):
        raise ValueError("transcript does not record true means")
    return np.array([float(np.max(np.abs(r.answer - r.true_mean))) for r in rows])


def generalization_error(transcript):
    """Maximum over rounds of the sup-norm gap between answer and true mean."""
    return float(per_round_errors(transcript).max())


def _result(session, epsilon, config_hash, seed, extra=None):
    tr = session.transcript
    if len(tr):
        errs = per_round_errors(tr)
        mx, acc = float(errs.max()), float(sample_accuracy_rate(tr, epsilon))
    else:
        errs, mx, acc = np.zeros(0), float("nan"), float("nan")
    return RunResult(errs, mx, acc, session.escapes, session.wall_time, config_hash, seed,
                     extra or {})


def _seed(config, seed):
    return config.seeds[0] if seed is None else seed


def run_session(config, seed=None):
    """Run one session of ``config`` and measure its generalization error.

    Parameters
    ----------
    config : ExperimentConfig or dict
    seed : int, optional
        Defaults to the first configured seed; drives the analyst draw, the
        dataset and the mechanism noise.

    Returns
    -------
    (Transcript, RunResult)
    """
    config = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    seed = _seed(config, seed)
    analyst = config.build_analyst(seed)
    dist = config.build_distribution()
    data = sample_dataset(dist, config.n, seed)
    mech = config.build_mechanism(seed).fit(data)
    sess = interact(analyst, mech, config.t, distribution=dist, mc_samples=config.mc_samples,
                    random_state=seed)
    return sess.transcript, _result(sess, config.accuracy_epsilon, config.hash, seed)


# --- overfitting attack -------------------------------------------------------------------


def hoeffding_baseline(n):
    """``sqrt(ln 2 / (2 n))``, the typical error of one fixed query."""
    return math.sqrt(math.log(2) / (2 * n))


def overfit_attack(n, t, seed, mechanism=None):
    """Sign-correlation attack on ``n`` fair-coin points.

    Round ``i`` asks the fresh boolean query ``x -> x_i``; the final query
    votes with signs ``s_i = sign(a_i - 1/2)`` (ties count as +1) and is
    true when ``sum_i s_i (x_i - 1/2) >= 0``. With ``t = 0`` the final query
    is the fixed query ``x -> x_0``.

    Parameters
    ----------
    n, t : int
    seed : int
    mechanism : Mechanism, optional
        Must be the exact empirical mechanism; anything else is rejected
        because the attack reads the full, unperturbed transcript.

    Returns
    -------
    RunResult
        ``extra["final_error"]`` is the final query's generalization error.
    """
    n = check_int(n, "n", minimum=1)
    t = check_int(t, "t", minimum=0)
    if mechanism is None:
        mechanism = EmpiricalMechanism()
    if type(mechanism) is not EmpiricalMechanism:
        raise ConfigError("the overfitting attack needs the exact empirical mechanism, "
                          f"got {type(mechanism).__name__}")
    start = time.perf_counter()
    width = max(t, 1)
    dist = BernoulliProduct((0.5,) * width)
    data = sample_dataset(dist, n, seed)
    mech = clone(mechanism).set_params(random_state=seed).fit(data)
    errs, signs = [], np.ones(width, dtype=np.int64)
    for i in range(t):
        a = mech.answer(CoordinateQuery([i]), i + 1)[0]
        errs.append(abs(a - 0.5))
        signs[i] = 1 if a >= 0.5 else -1
    final = VoteQuery(signs) if t else CoordinateQuery([0])
    a_star = mech.answer(final, t + 1)[0]
    final_error = float(abs(a_star - final.expectation(dist)[0]))
    errs.append(final_error)
    errs = np.array(errs)
    return RunResult(errs, float(errs.max()), 0.0, 0, time.perf_counter() - start, None, seed,
                     {"final_error": final_error, "n": n, "t": t,
                      "baseline": hoeffding_baseline(n)})


def attack_sweep(n, ts, seeds, n_jobs=1):
    """Final-query errors of :func:`overfit_attack`, shape ``(len(ts), len(seeds))``."""
    jobs = [(t, s) for t in ts for s in seeds]
    out = Parallel(n_jobs=n_jobs)(delayed(overfit_attack)(n, t, s) for t, s in jobs)
    return np.array([r.extra["final_error"] for r in out]).reshape(len(ts), len(seeds))


def fit_exponent(ts, errors):
    """Least-squares slope of ``log error`` against ``log t``."""
    ts, errors = np.asarray(ts, float), np.asarray(errors, float)
    if np.any(errors <= 0):
        raise ValueError("errors must be positive to fit a power law")
    return float(np.polyfit(np.log(ts), np.log(errors), 1)[0])


# --- scaling sweep ------------------------------------------------------------------------


def _depth(analyst, t_max):
    return identity_depth(analyst, t_max).k_int if analyst.grid else None


def envelope(klass, K, d_q, t, n, multiplier=1.0):
    """Theoretical error envelope for a class at depth ``K``.

    ``sqrt(K d_q ln t / n)`` for progressive analysts and
    ``(K d_q ln t)^(1/4) / sqrt(n)`` for conservative ones.
    """
    if K is None:
        return float("nan")
    x = K * d_q * math.log(t)
    if klass == "progressive":
        return multiplier * math.sqrt(x / n)
    return multiplier * x**0.25 / math.sqrt(n)


def _sweep_seed(config, seed, ts):
    analyst = config.build_analyst(seed)
    dist = config.build_distribution()
    mech = config.build_mechanism(seed).fit(sample_dataset(dist, config.n, seed))
    sess = interact(analyst, mech, max(ts), distribution=dist, mc_samples=config.mc_samples,
                    random_state=seed)
    prefix = np.maximum.accumulate(per_round_errors(sess.transcript))
    K = _depth(analyst, max(ts))
    return [(t, float(prefix[t - 1]), K, analyst.klass, analyst.d_q) for t in ts]


def scaling_sweep(config, n_jobs=1):
    """Max generalization error per (t, seed) with the class envelope.

    The session horizon of a prefix equals the session itself, so each seed
    runs once up to the largest ``t`` and every row reads its prefix maximum.

    Parameters
    ----------
    config : ExperimentConfig
        ``config.sweep["t"]`` is the ascending t-axis; further axes expand
        into separate sweep points.
    n_jobs : int
        Parallel sessions; output order does not depend on it.

    Returns
    -------
    list of dict
        Rows in (point, t, seed) order with the columns of ``SWEEP_COLUMNS``
        plus one column per extra axis.
    """
    ts = config.sweep.get("t")
    if not ts:
        raise ConfigError("scaling sweeps need a 't' axis")
    if list(ts) != sorted(ts) or ts[0] < 1:
        raise ConfigError("the t-axis must be sorted ascending and start at 1 or more")
    base = config.to_dict()
    base["sweep"] = {k: v for k, v in config.sweep.items() if k != "t"}
    base["t"] = max(ts)
    points = ExperimentConfig.from_dict(base).points()
    jobs = [(i, cfg, s) for i, (_, cfg) in enumerate(points) for s in cfg.seeds]
    results = Parallel(n_jobs=n_jobs)(delayed(_sweep_seed)(cfg, s, ts) for _, cfg, s in jobs)
    by_key = {(i, s): res for (i, _, s), res in zip(jobs, results)}
    rows = []
    for i, (assign, cfg) in enumerate(points):
        for j, t in enumerate(ts):
            for s in cfg.seeds:
                t_, err, K, klass, d_q = by_key[(i, s)][j]
                row = {"point": i, "t": t_, "seed": s, "n": cfg.n, "d_q": d_q, "K": K,
                       "max_error": err,
                       "envelope": envelope(klass, K, d_q, t_, cfg.n, cfg.envelope_multiplier),
                       "config_hash": cfg.hash}
                row.update(assign)
                rows.append(row)
    return rows


def sweep_to_csv(rows, path_or_buffer=None):
    """Write sweep rows as CSV; returns the text when no target is given."""
    fields = list(SWEEP_COLUMNS)
    for row in rows:
        fields += [k for k in row if k not in fields]
    buf = io.StringIO() if path_or_buffer is None else None
    fh = buf if buf is not None else (
        open(path_or_buffer, "w", newline="") if isinstance(path_or_buffer, str)
        else path_or_buffer)
    try:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else repr(row[k])
                                 if isinstance(row.get(k), float) else row[k])
                             for k in fields if k in row})
    finally:
        if isinstance(path_or_buffer, str):
            fh.close()
    return buf.getvalue() if buf is not None else None


# --- attack demonstrations ----------------------------------------------------------------


def counterexample_demo(K=1, t=20, bits=16, *, precision_bits=1024, n=100, seed=0):
    """Window-one attacker that rebuilds the whole transcript from its last answer.

    Parameters
    ----------
    K : int
        Window the truncated view is allowed; the attacker only uses one.
    t, bits : int
        Rounds and fixed-point bits per answer.
    precision_bits : int
        Precision of the mechanism's fixed-point answers.

    Returns
    -------
    dict
        ``recovered`` is true when the decoded transcript equals the directly
        computed one bit for bit; ``precision_failure`` carries the message
        when ``bits * t`` exceeds the budget.
    """
    K = check_int(K, "K", minimum=1)
    t = check_int(t, "t", minimum=1)
    adv = ReservedValueAdversary(bits, precision_bits, width=t)
    report = {"K": K, "window": adv.window, "t": t, "bits": bits,
              "precision_bits": precision_bits, "n": n, "seed": seed,
              "precision_failure": None, "recovered": False, "truth": None, "decoded": None}
    points = sample_dataset(BernoulliProduct((0.5,) * t), n, seed).points
    h, truth = 0, []
    try:
        for r in range(1, t + 1):
            q = adv.query(r, h)
            truth.append(adv.true_answer(q.base, points))
            h = adv.step(h, adv.answer(q, points), r)
    except PrecisionExhausted as exc:
        report["precision_failure"] = str(exc)
        return report
    decoded = adv.decode_transcript(h, t)
    report.update(truth=truth, decoded=decoded, recovered=decoded == truth)
    return report


def interleaving_demo(lam=0.9, digits=6, t=10, *, delta=None, n=1000, seed=0):
    """Store ``t`` answers in one scalar state and try to read them back.

    Answers are empirical means of distinct uniform coordinates, read at
    ``digits`` decimal places. With ``delta=None`` the state is exact and
    every answer decodes; on a grid the rounding erases the digits.
    """
    t = check_int(t, "t", minimum=1)
    an = InterleavingAnalyst(lam, 1.0, answer_digits=digits, delta=delta)
    data = sample_dataset(UniformBox.unit(t), n, seed)
    mech = EmpiricalMechanism().fit(data)
    answers = [an.quantize_answer(mech.answer(CoordinateQuery([r]), r + 1)[0]) for r in range(t)]
    states = an.run(answers)
    decoded = an.decode_transcript(states[-1], t)
    return {"lam": lam, "digits": digits, "t": t, "delta": delta,
            "answers": [str(a) for a in answers],
            "decoded": None if decoded is None else [str(a) for a in decoded],
            "recovered": decoded == answers}


# --- continuous mode ----------------------------------------------------------------------


def continuous_mode_session(config, seed=None, *, tol=1e-12):
    """Type B session on a continuous state space with the noise-split check.

    Every round draws ``eta ~ N(0, sigma^2 / 4)``, splits the recorded noise
    as ``xi1 = xi / 2 + eta`` and ``xi2 = xi - xi1`` and checks
    ``h_{t+1} = psi_t(h_t, q(S) + xi1) + B_t xi2`` to ``tol``.

    Raises
    ------
    ConfigError
        Grid analysts, analysts without a noise map, non-definite ``B_t`` or
        non-Gaussian mechanisms.
    EscapeError
        A state leaves the declared radius; the run is aborted.
    InvariantViolation
        The decomposition fails by more than ``tol``.
    """
    config = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    seed = _seed(config, seed)
    analyst = config.build_analyst(seed)
    if analyst.grid:
        raise ConfigError("continuous mode needs delta = None")
    if analyst.klass != "conservative_b" or not hasattr(analyst, "noise_map"):
        raise ConfigError("continuous mode needs a type B analyst with a noise map B_t")
    mech = config.build_mechanism(seed)
    if type(mech) is not GaussianMechanism:
        raise ConfigError("continuous mode needs the (unclamped) Gaussian mechanism")
    periods = analyst.B_.shape[0]
    try:
        lam_min = min(lambda_min(analyst.noise_map(i)) for i in range(1, periods + 1))
    except ValueError as exc:
        raise ConfigError(f"B_t must be square and definite: {exc}") from exc
    if lam_min <= 0:
        raise ConfigError(f"B_t must be definite, smallest eigenvalue is {lam_min:.3g}")

    dist = config.build_distribution()
    mech.fit(sample_dataset(dist, config.n, seed))
    try:
        sess = interact(analyst, mech, config.t, distribution=dist,
                        mc_samples=config.mc_samples, random_state=seed, abort_on_escape=True)
    except RuntimeError as exc:
        raise EscapeError(str(exc)) from exc

    split_rng = as_rng([seed, 1])
    sigma = mech.sigma
    worst = 0.0
    for r in sess.transcript:
        t = r.t
        h = sess.states[t - 1][None]
        xi = r.noise
        eta = split_rng.normal(0.0, sigma / 2, xi.shape[0])
        xi1 = xi / 2 + eta
        xi2 = xi - xi1
        direct = analyst.advance([t], h, r.answer[None])[0]
        split = analyst._psi(np.array([t]), h, (r.empirical + xi1)[None])[0]
        split = split + analyst.noise_map(t) @ xi2
        gap = float(np.max(np.abs(direct - split)))
        worst = max(worst, gap)
        if gap > tol:
            raise InvariantViolation(f"noise-split decomposition off by {gap:.3g} at round {t}")
    return _result(sess, config.accuracy_epsilon, config.hash, seed,
                   {"lambda_min": float(lam_min), "decomposition_max_gap": worst})


def exceedance_rate(mechanism, query, rounds, epsilon):
    """Fraction of ``rounds`` answers with ``||a - q(S)||_inf >= epsilon``."""
    rounds = check_int(rounds, "rounds", minimum=1)
    hits = 0
    for t in range(1, rounds + 1):
        resp = mechanism.respond(query, t)
        hits += bool(np.max(np.abs(resp.answer - resp.empirical)) >= epsilon)
    return hits / rounds
