import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from egpf.belief import (
    AbsoluteContinuityError,
    InteractionHistory,
    ZeroEvidenceError,
    bayes_update,
    divergence,
    drift_detect,
    entropy,
    window_statistic,
)

PRIOR = (0.35, 0.45, 0.20)


def beliefs(K):
    return arrays(float, K, elements=st.floats(0.001, 1.0)).map(lambda v: v / v.sum())


def test_bayes_worked_example():
    post = bayes_update(PRIOR, (0.65, 0.20, 0.40))
    assert np.allclose(post, (0.5723, 0.2264, 0.2013), atol=5e-5)
    # the unnormalised evidence for the lead type
    assert PRIOR[0] * 0.65 == pytest.approx(0.2275)
    assert float(np.dot(PRIOR, (0.65, 0.20, 0.40))) == pytest.approx(0.3975)


def test_bayes_uninformative_and_point_mass():
    assert np.allclose(bayes_update(PRIOR, (0.3, 0.3, 0.3)), PRIOR, atol=1e-15)
    assert np.array_equal(bayes_update((0, 1, 0), (0.2, 0.7, 0.1)), [0, 1, 0])


def test_bayes_zero_evidence():
    with pytest.raises(ZeroEvidenceError, match="zero evidence"):
        bayes_update((1, 0, 0), (0, 0.5, 0.5))


def test_bayes_rejects_negative_likelihood():
    with pytest.raises(ValueError):
        bayes_update(PRIOR, (0.5, -0.1, 0.2))


@given(beliefs(4), arrays(float, 4, elements=st.floats(0.01, 1)), arrays(float, 4, elements=st.floats(0.01, 1)))
def test_sequential_equals_batch(mu, l1, l2):
    seq = bayes_update(bayes_update(mu, l1), l2)
    batch = bayes_update(mu, l1 * l2)
    assert np.max(np.abs(seq - batch)) <= 1e-12


def test_entropy_examples():
    assert entropy((1 / 3,) * 3) == pytest.approx(math.log2(3), abs=1e-12)
    for K in (2, 3, 7):
        assert entropy((1 / K,) * K, alpha=2) == pytest.approx(math.log2(K), abs=1e-12)
    mu = (0.72, 0.18, 0.10)
    oracle = -sum(p * math.log2(p) for p in mu)
    assert entropy(mu) == pytest.approx(oracle, abs=1e-15)
    assert entropy(mu) == pytest.approx(1.1183, abs=5e-4)
    assert entropy((1, 0, 0)) == 0.0


def test_entropy_continuous_at_one():
    mu = (0.72, 0.18, 0.10)
    assert entropy(mu, 1 + 1e-7) == pytest.approx(entropy(mu), abs=1e-5)
    assert entropy(mu, 1 - 1e-7) == pytest.approx(entropy(mu), abs=1e-5)


@given(beliefs(5), st.floats(0, 10), st.floats(0, 10))
def test_renyi_monotone_in_order(mu, a1, a2):
    lo, hi = sorted((a1, a2))
    assert entropy(mu, hi) <= entropy(mu, lo) + 1e-9


def test_divergence_examples():
    assert divergence((0.2, 0.8), (0.2, 0.8)) == 0.0
    assert divergence((0.5, 0.5), (0.25, 0.75)) == pytest.approx(0.5 + 0.5 * math.log2(2 / 3), abs=1e-15)
    assert divergence((0.5, 0.5), (0.25, 0.75)) == pytest.approx(0.20752, abs=5e-6)
    assert divergence((1 / 3,) * 3, (1 / 3,) * 3, alpha=2) == 0.0


def test_divergence_absolute_continuity():
    with pytest.raises(AbsoluteContinuityError, match="absolute continuity violated"):
        divergence((0.5, 0.5), (1.0, 0.0))
    with pytest.raises(ValueError):
        divergence((0.5, 0.5), (0.3, 0.3, 0.4))


@given(beliefs(4), beliefs(4), st.sampled_from([0.5, 1.0, 2.0, 5.0]))
def test_divergence_nonnegative(p, q, alpha):
    assert divergence(p, q, alpha) >= 0.0
    assert divergence(p, p, alpha) <= 1e-12


@given(beliefs(3), beliefs(3))
def test_divergence_zero_only_at_equality(p, q):
    if np.max(np.abs(p - q)) > 1e-3:
        assert divergence(p, q) > 0


def test_history_invariants_and_round_trips():
    h = InteractionHistory.from_pairs([(0, 1), (2, 0), (1, 1)])
    assert [r.t for r in h.records] == [1, 2, 3]
    assert InteractionHistory.from_csv(h.to_csv()) == h
    assert InteractionHistory.from_json(h.to_json()) == h
    assert h.to_csv().splitlines()[0] == "t,action,response"
    assert h.append(0, 0).records[-1].t == 4
    with pytest.raises(ValueError, match="strictly increasing"):
        InteractionHistory(((0, 0, 2), (0, 1, 2)))


CHANNEL = np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]])


def test_drift_exact_match_is_small():
    # 20 draws per action laid out exactly in model proportions
    pairs = [(0, 0)] * 14 + [(0, 1)] * 4 + [(0, 2)] * 2 + [(1, 0)] * 2 + [(1, 1)] * 6 + [(1, 2)] * 12
    rep = drift_detect(InteractionHistory.from_pairs(pairs), CHANNEL, (1.0,), W=40)
    assert rep.statistic < 0.01
    assert not rep.triggered


def test_drift_in_model_samples_not_triggered():
    rng = np.random.default_rng(123)
    pairs = []
    for _ in range(30):
        a = int(rng.integers(2))
        pairs.append((a, int(rng.choice(3, p=CHANNEL[a]))))
    rep = drift_detect(InteractionHistory.from_pairs(pairs), CHANNEL, (1.0,), W=30, tau_drift=0.15)
    assert rep.statistic < 0.15 and not rep.triggered


def test_drift_disjoint_mode_triggers():
    model = np.array([[1.0 - 2e-3, 1e-3, 1e-3]])
    pairs = [(0, 2)] * 30
    rep = drift_detect(InteractionHistory.from_pairs(pairs), model, (1.0,), W=30)
    assert rep.triggered
    assert rep.to_dict()["triggered"] is True


def test_drift_uses_last_window_only():
    model = np.array([[0.5, 0.5]])
    pairs = [(0, 0)] * 50 + [(0, 0), (0, 1)] * 10
    rep = drift_detect(InteractionHistory.from_pairs(pairs), model, (1.0,), W=20)
    assert rep.statistic == pytest.approx(0.0, abs=1e-12)


def test_drift_per_type_model_mixes_by_belief():
    per_type = np.stack([CHANNEL, CHANNEL[::-1]], axis=2)
    pairs = [(0, 0)] * 10
    a = drift_detect(InteractionHistory.from_pairs(pairs), per_type, (1.0, 0.0), W=10)
    b = drift_detect(InteractionHistory.from_pairs(pairs), CHANNEL, (1.0,), W=10)
    assert a.statistic == pytest.approx(b.statistic, abs=1e-15)


def test_drift_errors():
    h = InteractionHistory.from_pairs([(0, 0)] * 5)
    with pytest.raises(ValueError, match="W"):
        drift_detect(h, CHANNEL, (1.0,), W=0)
    with pytest.raises(ValueError):
        drift_detect(h, CHANNEL, (1.0,), W=10)


def test_window_statistic_smoothing_oracle():
    pred = np.array([[0.5, 0.5]])
    W = 4
    s = 1 / W
    emp = np.array([1.0 + s, s]) / (1 + 2 * s)
    expected = float(np.sum(emp * np.log2(emp / 0.5)))
    assert window_statistic([0] * 4, [0] * 4, pred) == pytest.approx(expected, abs=1e-15)


def test_renyi_detector_order():
    pairs = [(0, 0)] * 30
    model = np.array([[0.5, 0.5]])
    h = InteractionHistory.from_pairs(pairs)
    kl = drift_detect(h, model, (1.0,), W=30).statistic
    r2 = drift_detect(h, model, (1.0,), W=30, alpha=2.0).statistic
    assert r2 >= kl
