"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are the stated ones. Empirical thresholds come from
``tests/golden/pilot.json``, produced by ``scripts/pilot.py`` on seeds
1000-1049; the runs here use seeds starting at 0.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from adaptive_analysts import ClampedGaussianMechanism, RoundedEmpiricalMechanism, UniformBox
from adaptive_analysts import EmpiricalMechanism, GaussianMechanism, sample_dataset
from adaptive_analysts.analysts import (
    BellmanAnalyst,
    ExponentialSchedule,
    InterleavingAnalyst,
    LinearAnalyst,
    LogisticLoss,
    QuadraticLoss,
    ReservedValueAdversary,
    StableRNNAnalyst,
    StackingAnalyst,
    ThresholdQueryMap,
    TypeAGradientAnalyst,
    TypeBGradientAnalyst,
    bellman_step,
    gd_contraction_bound,
    random_linear_analyst,
    verify_class,
)
from adaptive_analysts.harness import (
    ExperimentConfig,
    attack_sweep,
    continuous_mode_session,
    counterexample_demo,
    envelope,
    exceedance_rate,
    fit_exponent,
    hoeffding_baseline,
    interleaving_demo,
    random_type_b_analyst,
    scaling_sweep,
)
from adaptive_analysts.mechanisms import sigma_for
from adaptive_analysts.privacy import (
    DpParams,
    depth_conservative_a,
    depth_conservative_b,
    depth_continuous,
    depth_progressive,
    gaussian_dp,
    history_dp,
    strong_compose,
)
from adaptive_analysts.queries import CoordinateQuery
from adaptive_analysts.session import interact
from adaptive_analysts.truncation import (
    answer_independent,
    class_bound,
    identity_depth,
    identity_depth_check,
    truncated_states,
)

HERE = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(HERE, "golden", "pilot.json")) as _fh:
    PILOT = json.load(_fh)
FROZEN = PILOT["frozen"]

# criterion number -> (passed, detail); printed at the end of the run by conftest
RESULTS = {}


def report(n, passed, detail):
    RESULTS[n] = (bool(passed), detail)
    print(f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, f"criterion {n}: {detail}"


# --- 1 ----------------------------------------------------------------------------------


def test_criterion_01_progressive_identity():
    start = time.perf_counter()
    lines, ok = [], True
    for lam in (0.3, 0.6, 0.9):
        r = identity_depth_check(
            lambda s, lam=lam: random_linear_analyst(4, 2, lam, delta=1e-3, random_state=s),
            RoundedEmpiricalMechanism(0.1), UniformBox.unit(2), 1000, 500, range(20),
            max_examples=1)
        ok &= r["n_violations"] == 0 and r["n_query_mismatches"] == 0
        lines.append(f"lam={lam} k={r['k']} violations={r['n_violations']}/{r['n_checked']}")
    wall = time.perf_counter() - start
    report(1, ok and wall < 30, "; ".join(lines) + f"; {wall:.1f}s")


# --- 2 ----------------------------------------------------------------------------------


def test_criterion_02_progressive_closeness_bound():
    rng = np.random.default_rng(2)
    ks = np.arange(1, 21)
    ts = np.arange(1, 202)
    worst = -np.inf
    for i in range(1000):
        d, d_q = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        norm = [1, 2, "inf"][i % 3]
        an = random_linear_analyst(d, d_q, rng.uniform(0.0, 0.95), rng.uniform(0.1, 2.0),
                                   norm=norm, random_state=int(rng.integers(2**31)))
        data = sample_dataset(UniformBox.unit(d_q), 50, i)
        sess = interact(an, EmpiricalMechanism().fit(data), 200)
        trunc = truncated_states(an, sess.transcript, ks, ts)
        gaps = an.norm_.norms((trunc - sess.states[None]).reshape(-1, d)).reshape(len(ks), -1)
        bound = np.array([class_bound(an, k) for k in ks])
        worst = max(worst, float((gaps.max(axis=1) - bound).max()))
    report(2, worst <= 1e-9, f"max(gap - bound) = {worst:.3g} over 1000 instances")


# --- 3 ----------------------------------------------------------------------------------


def test_criterion_03_type_a_freeze():
    rng = np.random.default_rng(3)
    lines, ok = [], True
    for norm in (1, 2, "inf"):
        an = TypeAGradientAnalyst(QuadraticLoss(2), ExponentialSchedule(1.0, 0.5), delta=1e-2,
                                  norm=norm).fit()
        K = identity_depth(an).k_int
        frozen = all(
            answer_independent(an, rng.integers(-100, 100, 2), t,
                               np.vstack([rng.random((30, an.d_q)), np.eye(an.d_q),
                                          np.zeros((1, an.d_q)), np.ones((1, an.d_q))]))
            for t in range(K, 200)
        )
        ok &= frozen
        lines.append(f"norm={norm} K={K} frozen={frozen}")
    ok &= identity_depth(TypeAGradientAnalyst(QuadraticLoss(2), ExponentialSchedule(1.0, 0.5),
                                              delta=1e-2, norm="inf").fit()).k_int == 7
    report(3, ok, "; ".join(lines))


# --- 4 ----------------------------------------------------------------------------------


def test_criterion_04_type_b_bound_and_identity():
    ks = np.arange(1, 16)
    worst, lines, identity_ok = -np.inf, [], True
    for lam in (0.4, 0.7):
        for seed in range(20):
            an = random_type_b_analyst(3, lam, radius=10.0, delta=None, random_state=seed)
            mech = GaussianMechanism(0.05, random_state=seed)
            mech.fit(sample_dataset(UniformBox.unit(3), 500, seed))
            sess = interact(an, mech, 200)
            trunc = truncated_states(an, sess.transcript, ks, np.arange(1, 202),
                                     mode="conservative_b_last_k", mechanism=mech)
            gaps = np.linalg.norm(trunc - sess.states[None], axis=2).max(axis=1)
            bound = np.array([class_bound(an, k) for k in ks])
            worst = max(worst, float((gaps - bound).max()))
        r = identity_depth_check(
            lambda s, lam=lam: random_type_b_analyst(3, lam, radius=10.0, delta=1e-3,
                                                     random_state=s),
            GaussianMechanism(0.05), UniformBox.unit(3), 500, 200, range(20), max_examples=1)
        identity_ok &= r["n_violations"] == 0
        lines.append(f"lam={lam} k={r['k']} violations={r['n_violations']}/{r['n_checked']}")
    report(4, worst <= 1e-9 and identity_ok,
           f"max(gap - bound) = {worst:.3g}; identity: " + "; ".join(lines))


# --- 5 ----------------------------------------------------------------------------------


def test_criterion_05_accountant_golden():
    rel = 1e-12
    golden = [
        (gaussian_dp(0.1, 100, 1, 1e-5).alpha, 0.48448052626053894),
        (strong_compose(4, 0.1, 0.001, 0.01).alpha, 0.68697085175405854),
        (history_dp(DpParams(0.1, 0.001), 4, 0.01).alpha, 0.68697085175405854),
        (depth_progressive(0.5, 1, 1, 0.01).k_real, 8.6438561897747247),
        (depth_progressive(0.9, 1, 1, 0.01).k_real, 66.563035980348498),
        (depth_conservative_b(0.5, 10, 0.01).k_real, 10.965784284662087),
        (depth_continuous(0.5, 10, 4, 1, 0.1).k_real, 7.6438561897747247),
        (float(depth_conservative_a(ExponentialSchedule(1.0, 0.5), 0.01, 1).k_int), 7.0),
    ]
    worst = max(abs(got - want) / want for got, want in golden)

    rng = np.random.default_rng(5)
    bad = 0
    for _ in range(1000):
        lam = rng.uniform(0.01, 0.99)
        L, C1 = rng.uniform(0.1, 5), rng.uniform(1, 4)
        delta = 10 ** rng.uniform(-4, -1)
        D = rng.uniform(delta * 1.01, 100)
        k = depth_progressive(lam, L, C1, delta).k_int
        bad += not lam**k * L * C1 / (1 - lam) < delta
        k = depth_conservative_b(lam, D, delta).k_int
        bad += not lam**k * D < delta
        d, lmin, eps = int(rng.integers(1, 10)), rng.uniform(0.1, 3), rng.uniform(0.01, 1)
        k = depth_continuous(lam, D, d, lmin, eps).k_int
        bad += not lam**k * D * math.sqrt(d) / (math.sqrt(lmin) * eps) <= 1 + 1e-12
        rate = rng.uniform(0.1, 0.95)
        k = depth_conservative_a(ExponentialSchedule(1.0, rate), delta, C1, t_max=5000).k_int
        bad += not (rate**k < delta / C1 and (k == 1 or rate ** (k - 1) >= delta / C1))
    report(5, worst <= rel and bad == 0,
           f"max rel error {worst:.2g}; {bad} defining-inequality failures in 1000 tuples")


# --- 6 ----------------------------------------------------------------------------------


def test_criterion_06_clamped_gaussian_accuracy():
    eps, delta, rounds = 0.1, 0.1, 100_000
    sigma = sigma_for(eps, delta, 100, 2)
    mech = ClampedGaussianMechanism(sigma, random_state=6)
    mech.fit(sample_dataset(UniformBox.unit(2), 1000, 6))
    rate = exceedance_rate(mech, CoordinateQuery([0, 1]), rounds, eps)
    p = eps * delta
    limit = p + 3 * math.sqrt(p * (1 - p) / rounds)
    report(6, rate <= limit, f"sigma={sigma:.5f} rate={rate:.5f} limit={limit:.5f}")


# --- 7 ----------------------------------------------------------------------------------


def test_criterion_07_scaling_separation():
    start = time.perf_counter()
    ts = [10, 100, 1000, 10_000]
    cfg = ExperimentConfig.from_dict({
        "distribution": {"kind": "uniform_box", "low": [0] * 4, "high": [1] * 4},
        "n": 10_000, "t": 10_000,
        "analyst": {"family": "random_linear", "d": 4, "d_q": 2, "lam": 0.5, "L": 1.0},
        "mechanism": {"kind": "rounded_empirical", "epsilon": 0.01},
        "norm": 2, "delta": 1e-3, "seeds": list(range(20)), "sweep": {"t": ts},
        "envelope_multiplier": FROZEN["envelope_multiplier"],
    })
    rows = scaling_sweep(cfg)
    err = np.array([[r["max_error"] for r in rows if r["t"] == t] for t in ts])
    env = np.array([[r["envelope"] for r in rows if r["t"] == t] for t in ts])
    mean = err.mean(axis=1)
    ratio = mean[-1] / mean[0]
    slope = np.polyfit(np.log(ts), mean**2, 1)[0]
    within = bool(np.all(err <= env))
    ok_a = ratio <= FROZEN["progressive_ratio_max"] and slope >= 0 and within

    attack_ts = PILOT["attack"]["ts"]
    errs = attack_sweep(PILOT["attack"]["n"], attack_ts, list(range(50))).mean(axis=1)
    exponent = fit_exponent(attack_ts, errs)
    ratio_b = errs[attack_ts.index(200)] / hoeffding_baseline(PILOT["attack"]["n"])
    lo, hi = FROZEN["attack_exponent_range"]
    ok_b = lo <= exponent <= hi and ratio_b >= FROZEN["attack_ratio_t200_min"]
    wall = time.perf_counter() - start
    report(7, ok_a and ok_b and wall < 300,
           f"(a) ratio={ratio:.4f} slope={slope:.3g} under envelope={within}; "
           f"(b) exponent={exponent:.3f} ratio@200={ratio_b:.2f}; {wall:.0f}s")


# --- 8, 9 -------------------------------------------------------------------------------


def test_criterion_08_counterexample():
    r = counterexample_demo(K=1, t=20, bits=16)
    report(8, r["recovered"] and r["precision_failure"] is None,
           f"window={r['window']} decoded {len(r['decoded'] or [])} answers bit-exactly")


def test_criterion_09_interleaving():
    cont = interleaving_demo(0.9, 6, 10)
    grid = interleaving_demo(0.9, 6, 10, delta=1e-3)
    report(9, cont["recovered"] and not grid["recovered"],
           f"continuous recovered={cont['recovered']}, grid recovered={grid['recovered']}")


# --- 10 ---------------------------------------------------------------------------------


def test_criterion_10_linearity_identity():
    rng = np.random.default_rng(10)
    worst = 0.0
    for seed in range(100):
        d = int(rng.integers(1, 5))
        cfg = ExperimentConfig.from_dict({
            "distribution": {"kind": "uniform_box", "low": [0] * d, "high": [1] * d},
            "n": 200, "t": 50,
            "analyst": {"family": "random_type_b", "d": d, "lam": float(rng.uniform(0.1, 0.9)),
                        "radius": 50.0},
            "mechanism": {"kind": "gaussian", "sigma": float(rng.uniform(0.01, 0.2))},
            "delta": None, "seeds": [seed],
        })
        res = continuous_mode_session(cfg)
        worst = max(worst, res.extra["decomposition_max_gap"])
    report(10, worst <= 1e-12, f"max decomposition gap {worst:.3g} over 100 sessions")


# --- 11 ---------------------------------------------------------------------------------


def test_criterion_11_class_verification():
    rng = np.random.default_rng(11)
    bellman_excess = -np.inf
    for _ in range(500):
        d, m = int(rng.integers(1, 9)), int(rng.integers(1, 5))
        gamma = rng.uniform(0.05, 0.99)
        P = rng.random((d, m, d))
        P /= P.sum(axis=2, keepdims=True)
        r = rng.random((d, m))
        h1, h2 = rng.normal(0, 5, d), rng.normal(0, 5, d)
        ratio = (np.abs(bellman_step(h1, r, P, gamma) - bellman_step(h2, r, P, gamma)).max()
                 / np.abs(h1 - h2).max())
        bellman_excess = max(bellman_excess, ratio - gamma)

    gd_excess = -np.inf
    for _ in range(200):
        dim = int(rng.integers(1, 5))
        M = rng.normal(size=(dim, dim))
        Q = M @ M.T + rng.uniform(0.1, 1) * np.eye(dim)
        loss = QuadraticLoss(dim, Q)
        eta = rng.uniform(0.05, 1.0) * 2 / (loss.beta + loss.mu)
        an = TypeBGradientAnalyst(loss, eta, radius=5.0).fit()
        rep = verify_class(an, trials=100, seed=int(rng.integers(2**31)))
        ratio = [c for c in rep["checks"] if c["name"].startswith("contraction")][0]
        gd_excess = max(gd_excess,
                        ratio["max_ratio"] - gd_contraction_bound(eta, loss.beta, loss.mu))

    P = rng.random((3, 2, 3))
    P /= P.sum(axis=2, keepdims=True)
    families = [
        random_linear_analyst(4, 2, 0.6, delta=1e-3, random_state=0),
        random_linear_analyst(3, 2, 0.8, norm="inf", random_state=1),
        LinearAnalyst([[0.5]], [[1.0]], ThresholdQueryMap([[1.0]]), delta=1e-3).fit(),
        random_type_b_analyst(3, 0.7, delta=1e-3, random_state=2),
        StableRNNAnalyst(0.5 * np.eye(2), np.ones((2, 2)), ThresholdQueryMap(np.eye(2))).fit(),
        BellmanAnalyst(P, 0.9, delta=1e-3).fit(),
        TypeAGradientAnalyst(QuadraticLoss(2), ExponentialSchedule(1.0, 0.5), delta=1e-2).fit(),
        TypeAGradientAnalyst(LogisticLoss(2, 0.1), {"kind": "power", "eta0": 1.0, "a": 0.75}
                             ).fit(),
        TypeBGradientAnalyst(QuadraticLoss(2), 0.5, delta=1e-3).fit(),
        TypeBGradientAnalyst(LogisticLoss(2, 1.0), 0.5).fit(),
        StackingAnalyst(2, 1.0, 20),
        InterleavingAnalyst(0.9, 1.0),
        ReservedValueAdversary(16, 1024, width=4),
    ]
    failed = [f.family for f in families if not verify_class(f, trials=300, seed=11)["passed"]]
    ok = bellman_excess <= 1e-12 and gd_excess <= 1e-12 and not failed
    report(11, ok, f"bellman ratio - gamma <= {bellman_excess:.3g}; "
                   f"gd ratio - bound <= {gd_excess:.3g}; verify_class failures: {failed}")
