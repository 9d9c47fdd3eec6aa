from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from adaptive_analysts import Dataset, EmpiricalMechanism, GridState
from adaptive_analysts.analysts import (
    AnalystState,
    BellmanAnalyst,
    ExponentialSchedule,
    FixedQueryMap,
    InterleavingAnalyst,
    LinearAnalyst,
    PowerSchedule,
    PrecisionExhausted,
    QuadraticLoss,
    ReservedValueAdversary,
    StackingAnalyst,
    StableRNNAnalyst,
    ThresholdQueryMap,
    TypeAGradientAnalyst,
    TypeBGradientAnalyst,
    bellman_step,
    de_interleave,
    decode_gradient,
    encode_gradient,
    gd_contraction_bound,
    gd_step_a,
    gd_step_b,
    interleave,
    lambda_min,
    random_linear_analyst,
    reward_estimate,
    verify_class,
)
from adaptive_analysts.queries import ConstantQuery, CoordinateQuery
from adaptive_analysts.session import interact


def _scalar(delta=None):
    return LinearAnalyst([[0.5]], [[1.0]], FixedQueryMap(CoordinateQuery([0])),
                         delta=delta).fit()


# --- step -------------------------------------------------------------------------------


def test_scalar_linear_steps():
    an = _scalar()
    s = an.step(an.initial_state(), [0.5])
    assert s.t == 2 and s.point[0] == 0.5
    s = _scalar(1e-6).step(AnalystState(2, GridState([500_000], 1e-6)), [0.5])
    assert s.h == GridState([750_000], 1e-6)
    assert s.point[0] == pytest.approx(0.75, abs=1e-15)


def test_step_rejects_wrong_dimension():
    an = _scalar()
    with pytest.raises(ValueError):
        an.step(an.initial_state(), [0.5, 0.5])


def _families():
    P = np.full((3, 2, 3), 1 / 3)
    return [
        _scalar(),
        _scalar(1e-3),
        random_linear_analyst(4, 2, 0.6, delta=1e-3, random_state=0),
        StableRNNAnalyst(0.5 * np.eye(2), np.ones((2, 1)),
                         FixedQueryMap(CoordinateQuery([0]))).fit(),
        BellmanAnalyst(P, 0.9, delta=1e-3).fit(),
        TypeAGradientAnalyst(QuadraticLoss(2), ExponentialSchedule(1.0, 0.5), delta=1e-2).fit(),
        TypeBGradientAnalyst(QuadraticLoss(2), 0.5, delta=1e-3).fit(),
    ]


@pytest.mark.parametrize("an", _families(), ids=lambda a: f"{a.family}-{a.delta}")
def test_zero_state_zero_answer_is_fixed(an):
    s = an.step(an.initial_state(), np.zeros(an.d_q))
    assert np.all(an.unwrap(s.h) == 0)


@pytest.mark.parametrize("an", _families(), ids=lambda a: f"{a.family}-{a.delta}")
def test_verify_class_passes(an):
    report = verify_class(an, trials=300, seed=1)
    assert report["passed"], report["checks"]


def test_grid_states_are_grid_exact():
    an = random_linear_analyst(3, 2, 0.5, delta=1e-3, random_state=2)
    states = an.transform(np.random.default_rng(0).random((40, 2)))
    assert states.dtype == np.int64


# --- next_query -------------------------------------------------------------------------


def test_query_purity_over_replays():
    an = random_linear_analyst(3, 2, 0.5, delta=1e-3, random_state=3)
    rng = np.random.default_rng(4)
    for _ in range(1000):
        coords = rng.integers(-500, 500, 3)
        t = int(rng.integers(1, 50))
        h1, h2 = GridState(coords, 1e-3), GridState(coords.copy(), 1e-3)
        assert an.query(t, h1.point).id == an.query(t, h2.point).id


def test_gradient_query_encodes_gradient():
    loss = QuadraticLoss(1)
    an = TypeBGradientAnalyst(loss, 0.5, G=2.0).fit()
    pts = np.array([[0.0], [1.0]])
    vals = an.query(1, np.array([0.5]))(pts)
    # per-sample gradients 0.5 and -0.5, split into positive and negative parts
    np.testing.assert_allclose(vals, [[0.25, 0.0], [0.0, 0.25]])
    np.testing.assert_allclose(decode_gradient(encode_gradient([0.5, -1.5], 2.0), 2.0),
                               [0.5, -1.5])


def test_bellman_query_has_every_cell():
    P = np.full((2, 3, 2), 0.5)
    an = BellmanAnalyst(P, 0.5).fit()
    assert an.query(1, np.zeros(2)).d_q == 2 * 2 * 3


# --- Bellman ----------------------------------------------------------------------------


def test_bellman_examples():
    P = np.ones((1, 1, 1))
    h = bellman_step([0.0], [[0.6]], P, 0.9)
    assert h[0] == pytest.approx(0.6, abs=1e-15)
    h = bellman_step(h, [[0.6]], P, 0.9)
    assert h[0] == pytest.approx(1.14, abs=1e-15)
    for _ in range(2000):
        h = bellman_step(h, [[0.6]], P, 0.9)
    assert h[0] == pytest.approx(6.0, abs=1e-12)
    assert bellman_step([0.0], [[0.0]], P, 0.9)[0] == 0


def test_bellman_rejects_bad_inputs():
    with pytest.raises(ValueError):
        bellman_step([0.0], [[0.6]], np.full((1, 1, 1), 0.9), 0.9)
    with pytest.raises(ValueError):
        bellman_step([0.0], [[0.6]], np.ones((1, 1, 1)), 1.0)
    with pytest.raises(ValueError):
        bellman_step([0.0], np.zeros((1, 0)), np.ones((1, 0, 1)), 0.9)


@settings(max_examples=50)
@given(st.integers(1, 8), st.integers(1, 4), st.floats(0.05, 0.99), st.integers(0, 2**31))
def test_bellman_sup_norm_contraction(d, m, gamma, seed):
    rng = np.random.default_rng(seed)
    P = rng.random((d, m, d))
    P /= P.sum(axis=2, keepdims=True)
    r = rng.random((d, m))
    h1, h2 = rng.normal(0, 5, d), rng.normal(0, 5, d)
    lhs = np.abs(bellman_step(h1, r, P, gamma) - bellman_step(h2, r, P, gamma)).max()
    assert lhs <= (gamma + 1e-12) * np.abs(h1 - h2).max() + 1e-12


def test_reward_estimate_examples():
    S = np.array([[1, 1, 0.5, 0], [1, 1, 0.7, 2], [0, 1, 0.1, 1]])
    assert reward_estimate(S, 1, 1) == pytest.approx(0.6, abs=1e-15)
    assert reward_estimate(S, 2, 0) == 0.0
    same = np.array([[0, 0, 0.3, 0]] * 5)
    assert reward_estimate(same, 0, 0) == pytest.approx(0.3, abs=1e-15)


# --- gradient descent -------------------------------------------------------------------


def test_gd_step_a_examples():
    assert gd_step_a([1.0], [1.0], 1, lambda t: 0.5)[0] == 0.5
    assert gd_step_a([0.3], [0.0], 4, PowerSchedule(1.0, 1.0))[0] == 0.3
    # quadratic 1/2 (h - 0.5)^2 at h = 0 has gradient -0.5
    assert gd_step_a([0.0], [-0.5], 1, ExponentialSchedule(1.0, 0.5))[0] == 0.25
    with pytest.raises(ValueError):
        gd_step_a([0.0], [1.0], 3, lambda t: t)


def test_gd_step_b_examples():
    loss = QuadraticLoss(1)
    assert gd_contraction_bound(0.5, loss.beta, loss.mu) == 0.75
    h1 = gd_step_b([0.0], [0.0 - 0.5], 0.5, loss)
    h2 = gd_step_b(h1, h1 - 0.5, 0.5, loss)
    assert h1[0] == 0.25 and h2[0] == 0.375
    assert gd_step_b([1.0], [1.0], 1.0, loss)[0] == 0.0
    with pytest.raises(ValueError, match="2 / \\(beta \\+ mu\\)"):
        gd_step_b([1.0], [1.0], 1.01, loss)


def test_gd_type_b_session_matches_hand_iteration():
    # data constant at 0.5: empirical gradients are exact
    data = Dataset(np.full((10, 1), 0.5))
    an = TypeBGradientAnalyst(QuadraticLoss(1), 0.5, G=2.0).fit()
    tr = interact(an, EmpiricalMechanism().fit(data), 2).transcript
    states = an.transform(np.vstack([r.answer for r in tr]))
    np.testing.assert_allclose(states[:, 0], [0.0, 0.25, 0.375], atol=1e-15)
    assert an.gd_bound_ == 0.75


def test_gd_type_b_measured_contraction():
    an = TypeBGradientAnalyst(QuadraticLoss(1), 0.5).fit()
    report = verify_class(an, trials=500, seed=2)
    check = [c for c in report["checks"] if c["name"].startswith("contraction")][0]
    assert check["max_ratio"] <= 0.75 and check["max_ratio"] == pytest.approx(0.5, abs=1e-9)


def test_type_b_linearity_identity():
    rng = np.random.default_rng(5)
    an = TypeBGradientAnalyst(QuadraticLoss(3), 0.3).fit()
    for _ in range(200):
        h, a, xi = rng.normal(0, 2, (1, 3)), rng.random((1, 6)), rng.normal(0, 0.1, (1, 6))
        lhs = an.advance([1], h, a + xi)
        rhs = an.advance([1], h, a) + xi @ an.noise_map(1).T
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_lambda_min():
    assert lambda_min(np.eye(3)) == 1.0
    assert lambda_min(np.diag([2.0, 3.0])) == 2.0
    with pytest.raises(ValueError):
        lambda_min(np.ones((2, 4)))


def test_type_a_freezes_once_steps_are_small():
    an = TypeAGradientAnalyst(QuadraticLoss(1), ExponentialSchedule(1.0, 0.5), delta=1e-2,
                              norm="inf").fit()
    rng = np.random.default_rng(6)
    states = an.transform(rng.random((30, 2)))
    # 0.5^7 < 0.01: from round 7 on the state cannot move
    assert np.all(states[7:] == states[7])


def test_params_and_clone():
    an = TypeBGradientAnalyst(QuadraticLoss(1), 0.5)
    c = clone(an).set_params(eta=0.25)
    assert c.eta == 0.25 and an.eta == 0.5
    assert an.fit().to_dict()["family"] == "gd_type_b"
    with pytest.raises(ValueError):
        LinearAnalyst([[0.5]], [[1.0]], klass="conservative_b").fit()


# --- adversaries ------------------------------------------------------------------------


def test_interleave_examples():
    assert interleave(0.12, 0.34, 2) == Decimal("0.1324")
    assert interleave(0, 0, 3) == 0
    assert de_interleave(Decimal("0.1324"), 2) == (Decimal("0.12"), Decimal("0.34"))
    with pytest.raises(PrecisionExhausted):
        interleave(0.123, 0.34, 2)


@given(st.integers(0, 10**6 - 1), st.integers(0, 10**6 - 1))
def test_interleave_roundtrip(a, h):
    fa, fh = Fraction(a, 10**6), Fraction(h, 10**6)
    back = de_interleave(interleave(fa, fh, 6), 6)
    assert (Fraction(back[0]), Fraction(back[1])) == (fa, fh)


def test_stacking_example_and_budget():
    adv = StackingAnalyst(1, 1.0, t_max=3)
    h = adv.run([[0.5], [0.25], [1.0]])
    np.testing.assert_array_equal(h, [0.5, 0.25, 1.0])
    np.testing.assert_array_equal(adv.decode_transcript(h, 3)[:, 0], [0.5, 0.25, 1.0])
    with pytest.raises(PrecisionExhausted):
        adv.step(h, [0.1], 4)


def test_interleaving_one_round_and_grid_loss():
    adv = InterleavingAnalyst(1.0, 1.0)
    assert adv.decode_transcript(adv.step(0, 0.731), 1) == [Fraction(731, 1000)]
    answers = [0.25, 0.5, 0.125, 1.0]
    states = InterleavingAnalyst(0.9, 1.0).run(answers)
    assert InterleavingAnalyst(0.9, 1.0).decode_transcript(states[-1], 4) == [
        Fraction(a).limit_denominator(10**6) for a in answers]
    grid = InterleavingAnalyst(0.9, 1.0, delta=1e-3)
    assert grid.decode_transcript(grid.run(answers)[-1], 4) != answers


def test_reserved_value_roundtrip_16_bits():
    rng = np.random.default_rng(7)
    points = rng.integers(0, 2, (100, 20)).astype(float)
    adv = ReservedValueAdversary(bits=16, precision_bits=1024, width=20)
    h, truth = 0, []
    for t in range(1, 21):
        q = adv.query(t, h)
        truth.append(adv.true_answer(q.base, points))
        h = adv.step(h, adv.answer(q, points), t)
    assert adv.decode_transcript(h, 20) == truth
    with pytest.raises(PrecisionExhausted):
        ReservedValueAdversary(bits=16, precision_bits=64).query(5, 0)


@pytest.mark.parametrize("adv", [StackingAnalyst(2, 1.0, 10), InterleavingAnalyst(0.9, 1.0),
                                 ReservedValueAdversary(16, 1024, width=3)],
                         ids=lambda a: a.family)
def test_adversary_verify_roundtrip(adv):
    assert verify_class(adv, trials=8, seed=3)["passed"]


def test_threshold_map_clips():
    qm = ThresholdQueryMap([[10.0]])
    assert qm.thresholds(np.array([[1.0]]))[0, 0] == 1.0
    assert qm.thresholds(np.array([[-1.0]]))[0, 0] == 0.0
    assert ConstantQuery([0.2]).d_q == 1
