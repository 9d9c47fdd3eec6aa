import numpy as np
import pytest

from adaptive_analysts import (
    Dataset,
    EmpiricalMechanism,
    GaussianMechanism,
    RoundedEmpiricalMechanism,
    UniformBox,
    sample_dataset,
)
from adaptive_analysts.analysts import (
    ExponentialSchedule,
    FixedQueryMap,
    LinearAnalyst,
    QuadraticLoss,
    ThresholdQueryMap,
    TypeAGradientAnalyst,
    random_linear_analyst,
)
from adaptive_analysts.harness import random_type_b_analyst
from adaptive_analysts.queries import ConstantQuery, CoordinateQuery
from adaptive_analysts.session import interact
from adaptive_analysts.truncation import (
    TruncationMode,
    answer_independent,
    class_bound,
    closeness_gap,
    identity_depth,
    identity_depth_check,
    truncated_replay,
    truncated_states,
)


def _scalar(lam=0.5, delta=None, query=None):
    qm = FixedQueryMap(query or ConstantQuery([0.5]))
    return LinearAnalyst([[lam]], [[1.0]], qm, delta=delta).fit()


def _session(an, mech=None, T=10, n=10, width=1, seed=0):
    mech = (mech or EmpiricalMechanism()).fit(sample_dataset(UniformBox.unit(width), n, seed))
    return mech, interact(an, mech, T)


# --- construction -----------------------------------------------------------------------


def test_mode_validation():
    with pytest.raises(ValueError):
        TruncationMode("last_k", 2)
    with pytest.raises(ValueError):
        TruncationMode("progressive_last_k", 0)
    an = _scalar()
    assert TruncationMode.for_analyst(an, 3) == TruncationMode("progressive_last_k", 3)
    with pytest.raises(ValueError):
        truncated_replay(_session(an)[1].transcript, an, TruncationMode("conservative_a_first_k", 2))


def test_scalar_example():
    # answers 0.5 every round: h_2 = 0.5, h_3 = 0.75, h_4 = 0.875 on the full path;
    # the depth-2 replay restarts at h_2 = 0 and reaches 0.75 at h_4
    an = _scalar()
    answers = np.full((3, 1), 0.5)
    full = an.transform(answers)
    np.testing.assert_allclose(full[:, 0], [0, 0.5, 0.75, 0.875], atol=1e-15)
    trunc = truncated_states(an, answers, [2], [4])[0, 0, 0]
    assert trunc == pytest.approx(0.75, abs=1e-15)


def test_no_truncation_when_k_covers_t():
    an = random_linear_analyst(3, 2, 0.6, delta=1e-3, random_state=1)
    _, sess = _session(an, RoundedEmpiricalMechanism(0.1), T=30, width=2)
    trunc = truncated_replay(sess.transcript, an, TruncationMode("progressive_last_k", 31))
    np.testing.assert_array_equal(trunc, sess.states)


def test_one_step_memory_at_zero_contraction():
    an = LinearAnalyst(np.zeros((2, 2)), np.eye(2), ThresholdQueryMap(np.eye(2)),
                       delta=1e-3).fit()
    _, sess = _session(an, RoundedEmpiricalMechanism(0.1), T=40, width=2)
    trunc = truncated_replay(sess.transcript, an, TruncationMode("progressive_last_k", 1))
    np.testing.assert_array_equal(trunc, sess.states)


def test_type_b_replay_needs_noise_and_mechanism():
    an = random_type_b_analyst(2, 0.5, delta=1e-2, random_state=0)
    mech, sess = _session(an, GaussianMechanism(0.05, random_state=0), T=5, width=2)
    mode = TruncationMode("conservative_b_last_k", 2)
    with pytest.raises(ValueError):
        truncated_replay(sess.transcript, an, mode)
    answers = np.array([r.answer for r in sess.transcript])
    with pytest.raises(ValueError):
        truncated_states(an, answers, [2], [3], mode=mode.kind, mechanism=mech)


def test_type_b_replay_reuses_noise():
    an = random_type_b_analyst(2, 0.5, delta=None, random_state=3)
    mech, sess = _session(an, GaussianMechanism(0.05, random_state=3), T=20, n=50, width=2)
    trunc = truncated_replay(sess.transcript, an, TruncationMode("conservative_b_last_k", 25),
                             mechanism=mech)
    np.testing.assert_array_equal(trunc, sess.states)


def test_type_a_first_k_feeds_zeros():
    an = TypeAGradientAnalyst(QuadraticLoss(1), ExponentialSchedule(1.0, 0.5)).fit()
    answers = np.random.default_rng(0).random((6, 2))
    masked = answers.copy()
    masked[3:] = 0
    trunc = truncated_replay(answers, an, TruncationMode("conservative_a_first_k", 3))
    np.testing.assert_array_equal(trunc, an.transform(masked))


# --- closeness --------------------------------------------------------------------------


def test_closeness_gap_examples():
    traj = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert closeness_gap(traj, traj, 2) == 0
    assert closeness_gap(traj, np.zeros((2, 2)), 2, norm=2) == 5.0
    grid = np.array([[0, 0], [3, 4]], dtype=np.int64)
    assert closeness_gap(grid, np.zeros_like(grid), 2, delta=0.1) == 5 * 0.1
    with pytest.raises(ValueError):
        closeness_gap(grid, np.zeros_like(grid), 2)
    with pytest.raises(ValueError):
        closeness_gap(traj, traj, 3)


def test_class_bound_example():
    an = _scalar()
    assert class_bound(an, 3) == 0.25


@pytest.mark.parametrize("seed", range(20))
def test_progressive_bound_and_monotone_envelope(seed):
    rng = np.random.default_rng(seed)
    lam = rng.uniform(0.1, 0.9)
    an = random_linear_analyst(4, 2, lam, L=rng.uniform(0.2, 2), norm=2, random_state=seed)
    _, sess = _session(an, T=150, n=100, width=2, seed=seed)
    ks = np.arange(1, 21)
    tr = truncated_states(an, sess.transcript, ks, np.arange(1, 152))
    gaps = np.linalg.norm(tr - sess.states[None], axis=2)
    bounds = np.array([class_bound(an, k) for k in ks])
    assert np.all(gaps.max(axis=1) <= bounds + 1e-9)
    # the worst gap over rounds shrinks with k (a single round need not)
    assert np.all(np.diff(gaps.max(axis=1)) <= 1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_type_b_bound_with_shared_noise(seed):
    an = random_type_b_analyst(3, 0.7, delta=None, random_state=seed)
    mech, sess = _session(an, GaussianMechanism(0.05, random_state=seed), T=80, n=100,
                          width=3, seed=seed)
    ks = np.arange(1, 16)
    tr = truncated_states(an, sess.transcript, ks, np.arange(1, 82),
                          mode="conservative_b_last_k", mechanism=mech)
    gaps = np.linalg.norm(tr - sess.states[None], axis=2).max(axis=1)
    assert np.all(gaps <= np.array([class_bound(an, k) for k in ks]) + 1e-9)
    assert np.all(np.diff(gaps) <= 1e-12)


# --- identity on the grid ---------------------------------------------------------------


def test_identity_scalar_progressive():
    an = LinearAnalyst([[0.5]], [[1.0]], ThresholdQueryMap([[1.0]]), delta=0.01).fit()
    assert identity_depth(an).k_int == 9
    r = identity_depth_check(an, RoundedEmpiricalMechanism(0.1), UniformBox.unit(1), 200, 500,
                             range(5))
    assert r["k"] == 9 and r["n_violations"] == 0 and r["n_query_mismatches"] == 0


def test_identity_scalar_type_b_noise_free():
    an = LinearAnalyst([[0.5]], [[0.1]], ThresholdQueryMap([[0.1]]), klass="conservative_b",
                       contraction=0.5, radius=10, delta=0.01).fit()
    assert identity_depth(an).k_int == 11
    r = identity_depth_check(an, EmpiricalMechanism(), UniformBox.unit(1), 200, 500, range(5))
    assert r["n_violations"] == 0


def test_identity_detector_flags_shallow_depth():
    an = LinearAnalyst([[0.9]], [[1.0]], ThresholdQueryMap([[1.0]]), delta=0.01).fit()
    r = identity_depth_check(an, RoundedEmpiricalMechanism(0.1), UniformBox.unit(1), 200, 100,
                             range(3), k=1)
    assert r["k"] == 1 and r["n_violations"] > 0
    ex = r["examples"][0]
    assert {"seed", "t", "full", "truncated"} <= set(ex)


def test_identity_depth_needs_grid():
    with pytest.raises(ValueError):
        identity_depth(_scalar())


# --- type A freeze ----------------------------------------------------------------------


@pytest.mark.parametrize("norm", [1, 2, "inf"])
def test_type_a_freeze(norm):
    an = TypeAGradientAnalyst(QuadraticLoss(2), ExponentialSchedule(1.0, 0.5), delta=1e-2,
                              norm=norm).fit()
    K = identity_depth(an).k_int
    assert 0.5**K < 1e-2 / an.c1_
    rng = np.random.default_rng(1)
    for t in range(K, 40):
        S = rng.integers(-50, 50, 2)
        assert answer_independent(an, S, t, rng.random((20, an.d_q)))
    data = Dataset(rng.random((30, 2)))
    sess = interact(an, EmpiricalMechanism().fit(data), 40)
    trunc = truncated_replay(sess.transcript, an, TruncationMode("conservative_a_first_k", K))
    np.testing.assert_array_equal(trunc, sess.states)


def test_type_a_not_frozen_early():
    an = TypeAGradientAnalyst(QuadraticLoss(1), ExponentialSchedule(1.0, 0.5), delta=1e-2,
                              norm="inf").fit()
    assert not answer_independent(an, np.zeros(1, dtype=np.int64), 1, [[0, 0], [1, 0]])


def test_coordinate_query_scalar_session():
    an = _scalar(query=CoordinateQuery([0]))
    data = Dataset(np.array([[1.0], [1.0], [0.0], [0.0]]))
    sess = interact(an, EmpiricalMechanism().fit(data), 3)
    np.testing.assert_allclose(sess.states[:, 0], [0, 0.5, 0.75, 0.875], atol=1e-15)
