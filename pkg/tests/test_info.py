import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egpf.belief import entropy
from egpf.info import (
    NonPositiveLikelihood,
    binary_entropy,
    channel_capacity,
    curve_csv,
    curve_is_monotone_convex,
    d_optimal_action,
    expected_posterior_entropy,
    fisher_information,
    information_gain,
    is_psd,
    max_useful_distortion,
    mutual_information,
    personalization_distortion,
    qre_likelihood,
    rate_at_distortion,
    rate_distortion_curve,
)
from egpf.core import TypeVector, UtilityFeatures
from egpf.game import softmax
from egpf.sim import observation_channel, ScenarioConfig

BSC = np.array([[0.9, 0.1], [0.1, 0.9]])


def random_channel(rng, M, L):
    W = rng.dirichlet(np.ones(L), size=M)
    return W


def test_mutual_information_examples():
    same = np.array([[0.3, 0.7], [0.3, 0.7]])
    assert mutual_information((0.2, 0.8), same) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information((1 / 3,) * 3, np.eye(3)) == pytest.approx(math.log2(3), abs=1e-12)
    assert mutual_information((0.5, 0.5), BSC) == pytest.approx(1 - binary_entropy(0.1), abs=1e-12)
    assert mutual_information((0.5, 0.5), BSC) == pytest.approx(0.53100, abs=5e-6)


def test_capacity_examples():
    res = channel_capacity(np.eye(2))
    assert res.capacity == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(res.input_distribution, 0.5)
    assert channel_capacity(BSC).capacity == pytest.approx(1 - binary_entropy(0.1), abs=1e-6)
    assert channel_capacity(np.array([[0.2, 0.8]] * 3)).capacity == pytest.approx(0.0, abs=1e-12)


def test_capacity_reports_non_convergence():
    W = np.array([[0.9, 0.1, 0.0], [0.0, 0.5, 0.5], [0.3, 0.3, 0.4]])
    res = channel_capacity(W, tol=1e-15, max_iters=3)
    assert not res.converged
    assert res.iterations == 3
    assert res.capacity > 0


@given(st.integers(0, 10**6), st.integers(2, 5), st.integers(2, 5))
@settings(max_examples=50)
def test_capacity_is_max_and_monotone(seed, M, L):
    rng = np.random.default_rng(seed)
    W = random_channel(rng, M, L)
    res = channel_capacity(W)
    assert np.all(np.diff(res.history) >= -1e-12)
    for _ in range(5):
        q = rng.dirichlet(np.ones(M))
        assert res.capacity >= mutual_information(q, W) - 1e-9


def brute_force_ig(mu, P):
    """I(Theta; D) from the explicit joint table over (type, response)."""
    mu = np.asarray(mu)
    L, K = P.shape
    joint = {(k, d): mu[k] * P[d, k] for k in range(K) for d in range(L)}
    pd = {d: sum(joint[k, d] for k in range(K)) for d in range(L)}
    return sum(v * math.log2(v / (mu[k] * pd[d])) for (k, d), v in joint.items() if v > 0)


def test_information_gain_examples():
    mu = (0.35, 0.45, 0.20)
    same = np.tile(np.array([0.2, 0.5, 0.3])[None, :, None], (1, 1, 3))
    assert information_gain(mu, 0, same) == pytest.approx(0.0, abs=1e-15)
    revealing = np.eye(3)[None, :, :]
    assert information_gain(mu, 0, revealing) == pytest.approx(entropy(mu), abs=1e-12)
    col = np.array([0.65, 0.20, 0.40])
    chan = np.stack([col, 1 - col])[None]
    ig = information_gain(mu, 0, chan)
    assert ig == pytest.approx(brute_force_ig(mu, chan[0]), abs=1e-12)
    assert ig == pytest.approx(entropy(mu) - expected_posterior_entropy(mu, 0, chan), abs=1e-12)


@given(st.integers(0, 10**6), st.integers(2, 4), st.integers(2, 4))
@settings(max_examples=50)
def test_information_gain_bounded(seed, L, K):
    rng = np.random.default_rng(seed)
    mu = rng.dirichlet(np.ones(K))
    P = rng.dirichlet(np.ones(L), size=K).T[None]  # (1, L, K)
    ig = information_gain(mu, 0, P)
    assert ig >= 0
    assert ig == pytest.approx(brute_force_ig(mu, P[0]), abs=1e-10)
    cap = channel_capacity(P[0].T).capacity
    assert ig <= min(entropy(mu), cap) + 1e-7


def test_fisher_constant_likelihood_is_zero():
    lik = lambda x, a: np.array([0.3, 0.7])  # noqa: E731
    assert np.array_equal(fisher_information([0.5, 0.2], 0, lik), np.zeros((2, 2)))


@pytest.mark.parametrize("theta,g,c,tau", [(0.3, 1.5, -0.2, 3.0), (1.2, -0.7, 0.4, 5.0), (0.0, 2.0, 0.0, 1.0)])
def test_fisher_logistic_oracle(theta, g, c, tau):
    def lik(x, a):
        p = 1.0 / (1.0 + math.exp(-tau * (g * x[0] + c)))
        return np.array([p, 1 - p])

    p = lik([theta], 0)[0]
    info = fisher_information([theta], 0, lik)
    assert info.shape == (1, 1)
    assert info[0, 0] == pytest.approx(tau**2 * p * (1 - p) * g**2, rel=1e-7)


def test_fisher_rejects_non_positive():
    lik = lambda x, a: np.array([x[0], 1 - x[0]])  # noqa: E731
    with pytest.raises(NonPositiveLikelihood):
        fisher_information([0.0], 0, lik)


def oncology_features():
    rng = np.random.default_rng(5)
    M, L = 3, 3
    return UtilityFeatures(
        evidence=rng.uniform(0, 1, M),
        peer=rng.uniform(0, 1, M),
        outcome=rng.uniform(0, 1, (M, L)),
        access=rng.uniform(0, 1, L),
        variance=rng.uniform(0, 0.5, M),
        load=rng.uniform(0, 0.5, M),
    )


def test_fisher_qre_psd():
    theta = TypeVector(0.6, 0.25, 0.1, 0.05, beta=2.0, gamma=0.3, delta=0.8, kappa=0.9)
    lik = qre_likelihood(oncology_features(), 3.0)
    for a in range(3):
        info = fisher_information(theta, a, lik)
        assert info.shape == (8, 8)
        assert is_psd(info)


@given(st.integers(0, 10**6))
@settings(max_examples=25)
def test_fisher_psd_randomized(seed):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(3, 2))
    lik = lambda x, a: softmax(2.0 * (G @ x))  # noqa: E731
    info = fisher_information(rng.normal(size=2), 0, lik)
    assert is_psd(info)
    assert np.allclose(info, info.T, atol=1e-9)


def test_d_optimal_examples():
    lik = lambda x, a: softmax(np.array([x[0], 0.0]))  # noqa: E731
    assert d_optimal_action([0.2], [0], lik) == 0

    def two(x, a):
        if a == 0:
            return np.array([0.5, 0.5])
        return softmax(np.array([x[0], -x[0]]))

    assert d_optimal_action([0.2], [0, 1], two) == 1


def test_d_optimal_matches_analytic_det_oracle():
    rng = np.random.default_rng(9)
    tau = 2.0
    Gs = [rng.normal(size=(3, 2)) for _ in range(3)]
    x = np.array([0.3, -0.4])

    def lik(v, a):
        return softmax(tau * (Gs[a] @ v))

    dets = []
    for G in Gs:
        p = softmax(tau * (G @ x))
        # Fisher of a softmax family: tau^2 G^T (diag p - p p^T) G
        dets.append(np.linalg.det(tau**2 * G.T @ (np.diag(p) - np.outer(p, p)) @ G))
    assert d_optimal_action(x, [0, 1, 2], lik, project_simplex=False) == int(np.argmax(dets))


def test_d_optimal_trace_mode():
    def lik(x, a):
        scale = (1.0, 3.0)[a]
        return softmax(np.array([scale * x[0], 0.0]))

    assert d_optimal_action([0.1], [0, 1], lik, mode="trace_approx", sigma=np.eye(1)) == 1
    with pytest.raises(ValueError):
        d_optimal_action([0.1], [0, 1], lik, mode="trace_approx")


def test_d_optimal_projects_type_vectors():
    theta = TypeVector(0.25, 0.25, 0.25, 0.25, beta=1.0, gamma=0.5, delta=0.5, kappa=1.0)
    a = d_optimal_action(theta, [0, 1, 2], qre_likelihood(oncology_features(), 3.0))
    assert a in (0, 1, 2)


def test_rate_distortion_zero_distortion():
    pts = rate_distortion_curve((0.5, 0.5), np.zeros((2, 3)), [0.0, 1.0, 10.0])
    assert all(pt.rate == pytest.approx(0.0, abs=1e-12) for pt in pts)


def test_rate_zero_regime():
    d = 1 - np.eye(3)
    p = (0.5, 0.3, 0.2)
    assert max_useful_distortion(p, d) == pytest.approx(0.5)
    assert rate_at_distortion(p, d, 0.5) == 0.0
    assert rate_at_distortion(p, d, 0.9) == 0.0


def test_rate_full_identification_at_zero_distortion():
    d = 1 - np.eye(3)
    uniform = (1 / 3,) * 3
    assert rate_at_distortion(uniform, d, 0.0) == pytest.approx(math.log2(3), abs=1e-6)
    pts = rate_distortion_curve(uniform, d, [math.inf])
    assert pts[0].distortion == pytest.approx(0.0, abs=1e-12)
    assert pts[0].rate == pytest.approx(math.log2(3), abs=1e-9)


def test_rate_distortion_hamming_oracle():
    # uniform source with Hamming distortion: R(D) = log2 3 - H_b(D) - D log2 2 for D <= 2/3
    d = 1 - np.eye(3)
    for D in (0.05, 0.2, 0.4):
        expected = math.log2(3) - binary_entropy(D) - D
        assert rate_at_distortion((1 / 3,) * 3, d, D) == pytest.approx(expected, abs=1e-6)


def grid_rate(p, d, D, n=40):
    """Smallest I(Theta; C) over a grid of conditionals Q(c|theta) meeting E d <= D (two types, two contents)."""
    best = math.inf
    for a, b in itertools.product(np.linspace(0, 1, n + 1), repeat=2):
        Q = np.array([[a, 1 - a], [b, 1 - b]])
        if float(p @ (Q * d).sum(axis=1)) <= D + 1e-12:
            best = min(best, mutual_information(p, Q))
    return best


def test_rate_distortion_grid_oracle():
    p = np.array([0.6, 0.4])
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    for D in (0.1, 0.25):
        exact = rate_at_distortion(p, d, D)
        assert exact <= grid_rate(p, d, D) + 1e-9
        assert grid_rate(p, d, D, n=200) - exact < 0.02


@given(st.integers(0, 10**6), st.integers(2, 4), st.integers(2, 4))
@settings(max_examples=10, deadline=None)
def test_rate_distortion_monotone_convex(seed, K, C):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(K))
    d = rng.uniform(0, 1, (K, C))
    slopes = [0.0, *np.geomspace(0.05, 50, 25), math.inf]
    pts = rate_distortion_curve(p, d, slopes)
    assert all(pt.rate >= 0 for pt in pts)
    assert curve_is_monotone_convex(pts)


def test_rate_distortion_errors_and_csv():
    with pytest.raises(ValueError):
        rate_distortion_curve((0.5, 0.5), -np.ones((2, 2)), [1.0])
    with pytest.raises(ValueError):
        rate_distortion_curve((0.5, 0.5), np.ones((3, 2)), [1.0])
    pts = rate_distortion_curve((0.5, 0.5), 1 - np.eye(2), [1.0])
    assert curve_csv(pts).splitlines()[0] == "lambda,rate_bits,distortion"


def test_personalization_distortion_formula():
    rel = np.array([[0.9, 0.2], [0.1, 0.8]])
    d = personalization_distortion(rel, (0.1, 0.3), np.full((2, 2), 0.05), lambda_r=2.0, lambda_p=1.0)
    assert d[0, 1] == pytest.approx(1 - 0.2 + 0.6 + 0.05)


def test_engagement_capacities_in_bits(onc):
    chan = observation_channel(ScenarioConfig(game=onc))
    for k in range(3):
        cap = channel_capacity(chan[:, :, k]).capacity
        assert 0 <= cap <= math.log2(3)
