"""Channel capacity, information gain, Fisher information and rate-distortion.

Channels are row-stochastic ``(M, L)`` matrices P(d | a); per-type families
are ``(M, L, K)`` like the QRE likelihood tensor. Everything is in bits.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import linalg

from .belief import bayes_update, entropy
from .core import TYPE_FIELDS, SIMPLEX_TOL, TypeVector, UtilityFeatures, as_belief
from .game import physician_utility, softmax

DEFAULT_CAPACITY_TOL = 1e-9
DEFAULT_MAX_ITERS = 10_000
DEFAULT_FD_STEP = 1e-5

Likelihood = Callable[[np.ndarray, int], np.ndarray]


class NonPositiveLikelihood(ValueError):
    pass


def as_channel(channel: np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    W = np.array(channel, dtype=float)
    if W.ndim != 2:
        raise ValueError("channel must be a 2-d row-stochastic matrix")
    if np.any(W < 0) or np.any(W > 1):
        raise ValueError("channel entries must lie in [0, 1]")
    if np.any(np.abs(W.sum(axis=1) - 1.0) > SIMPLEX_TOL):
        raise ValueError("channel rows must sum to 1")
    return W


def _row_divergences(W: np.ndarray, q: np.ndarray) -> np.ndarray:
    # D(W[x] || q) for every input x, with 0 log 0 = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(W > 0, W * np.log2(W / q[None, :]), 0.0)
    return terms.sum(axis=1)


def mutual_information(input_dist: Sequence[float] | np.ndarray, channel: np.ndarray) -> float:
    p = as_belief(input_dist)
    W = as_channel(channel)
    if p.size != W.shape[0]:
        raise ValueError("input distribution does not match channel rows")
    q = p @ W
    return max(float(p @ _row_divergences(W, q)), 0.0)


@dataclass(frozen=True)
class CapacityResult:
    capacity: float
    input_distribution: np.ndarray
    iterations: int
    converged: bool
    lower_bound: float
    upper_bound: float
    history: np.ndarray  # I(X;Y) of every iterate, non-decreasing


def channel_capacity(
    channel: np.ndarray,
    tol: float = DEFAULT_CAPACITY_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> CapacityResult:
    """Blahut-Arimoto. Stops once ``max_x D(W_x || q) - log2 sum_x r_x 2^D_x < tol``.

    The reported capacity is the mutual information of the returned input,
    so it never overshoots the true capacity. ``converged`` is False when
    ``max_iters`` ran out; the last iterate is still returned.
    """
    W = as_channel(channel)
    M = W.shape[0]
    r = np.full(M, 1.0 / M)
    history = []
    converged = False
    lower = upper = 0.0
    it = 0
    for it in range(1, max_iters + 1):
        q = r @ W
        D = _row_divergences(W, q)
        history.append(max(float(r @ D), 0.0))
        upper = float(D.max())
        shift = upper
        lower = shift + math.log2(float(r @ np.exp2(D - shift)))
        if upper - lower < tol:
            converged = True
            break
        r = r * np.exp2(D - shift)
        r /= r.sum()
    hist = np.array(history)
    return CapacityResult(float(hist[-1]), r, it, converged, lower, upper, hist)


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def information_gain(
    mu: Sequence[float] | np.ndarray, action: int, channels: np.ndarray
) -> float:
    """Expected entropy reduction of the type posterior from observing the
    response to ``action``; equals I(Theta; D | a, mu)."""
    mu = as_belief(mu)
    P = np.asarray(channels, dtype=float)[action]  # (L, K)
    pd = P @ mu
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where((P > 0) & (mu[None, :] > 0), mu[None, :] * P * np.log2(P / pd[:, None]), 0.0)
    return max(float(terms.sum()), 0.0)


def information_gains(mu: Sequence[float] | np.ndarray, channels: np.ndarray) -> np.ndarray:
    return np.array([information_gain(mu, a, channels) for a in range(np.shape(channels)[0])])


def expected_posterior_entropy(mu, action: int, channels: np.ndarray) -> float:
    """E_d[H(Theta | mu, d, a)] by explicit enumeration of responses."""
    mu = as_belief(mu)
    P = np.asarray(channels, dtype=float)[action]
    total = 0.0
    for d in range(P.shape[0]):
        pd = float(P[d] @ mu)
        if pd > 0:
            total += pd * entropy(bayes_update(mu, P[d]))
    return total


def _theta_array(theta: TypeVector | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(theta, TypeVector):
        return theta.as_array()
    return np.atleast_1d(np.asarray(theta, dtype=float))


def fisher_information(
    theta: TypeVector | Sequence[float] | np.ndarray,
    action: int,
    likelihood: Likelihood,
    step: float = DEFAULT_FD_STEP,
) -> np.ndarray:
    """Expected outer product of score vectors, scores by central differences.

    The step for coordinate j is ``step * max(1, |theta_j|)``.
    """
    x = _theta_array(theta)
    p0 = np.asarray(likelihood(x, action), dtype=float)
    if np.any(p0 <= 0):
        raise NonPositiveLikelihood("non-positive likelihood at theta")
    n = x.size
    scores = np.empty((n, p0.size))
    for j in range(n):
        h = step * max(1.0, abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        plus = np.asarray(likelihood(x + e, action), dtype=float)
        minus = np.asarray(likelihood(x - e, action), dtype=float)
        if np.any(plus <= 0) or np.any(minus <= 0):
            raise NonPositiveLikelihood(f"non-positive likelihood at theta +/- h e_{j}")
        scores[j] = (np.log(plus) - np.log(minus)) / (2.0 * h)
    info = (scores * p0[None, :]) @ scores.T
    return 0.5 * (info + info.T)


def is_psd(matrix: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(matrix, dtype=float)
    return bool(np.allclose(m, m.T, atol=1e-9) and np.linalg.eigvalsh(m).min() >= -tol)


def simplex_tangent_basis(n: int = len(TYPE_FIELDS)) -> np.ndarray:
    """Orthonormal ``(n, n-1)`` basis of directions keeping the four influence
    weights on their simplex."""
    c = np.zeros((1, n))
    c[0, :4] = 1.0
    return linalg.null_space(c)


def qre_likelihood(features: UtilityFeatures, tau: float, prev_response: int = 0) -> Likelihood:
    """Logit response model over the 8-d type vector, for Fisher computations."""

    def lik(x: np.ndarray, action: int) -> np.ndarray:
        theta = TypeVector.from_array(x)
        u = np.array(
            [physician_utility(features, action, d, prev_response, theta) for d in range(features.n_responses)]
        )
        return softmax(tau * u)

    return lik


def _pseudo_log_det(m: np.ndarray, rel_tol: float = 1e-9) -> tuple[int, float]:
    eig = np.linalg.eigvalsh(0.5 * (m + m.T))
    scale = max(float(np.abs(eig).max()), 1.0) if eig.size else 1.0
    keep = eig[eig > rel_tol * scale]
    return int(keep.size), float(np.log(keep).sum()) if keep.size else -math.inf


def d_optimal_action(
    mu_hat: TypeVector | Sequence[float] | np.ndarray,
    actions: Sequence[int],
    likelihood: Likelihood,
    mode: Literal["det", "trace_approx"] = "det",
    sigma: np.ndarray | None = None,
    step: float = DEFAULT_FD_STEP,
    project_simplex: bool | None = None,
) -> int:
    """Most informative action at the type estimate ``mu_hat``.

    ``det`` ranks actions by (rank, log pseudo-determinant) of the Fisher
    matrix, so a full-rank design always beats a degenerate one.
    ``trace_approx`` ranks by ``0.5 * tr(I_a @ sigma)``. For 8-d type vectors
    the matrix is first restricted to the simplex tangent space.
    """
    x = _theta_array(mu_hat)
    if project_simplex is None:
        project_simplex = x.size == len(TYPE_FIELDS)
    basis = simplex_tangent_basis(x.size) if project_simplex else None
    best_action, best_key = None, None
    for a in actions:
        info = fisher_information(x, a, likelihood, step)
        if mode == "det":
            m = basis.T @ info @ basis if basis is not None else info
            key: tuple = _pseudo_log_det(m)
        elif mode == "trace_approx":
            if sigma is None:
                raise ValueError("trace_approx needs the posterior covariance sigma")
            key = (0.5 * float(np.trace(info @ np.asarray(sigma, float))),)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        if best_key is None or key > best_key:
            best_action, best_key = a, key
    if best_action is None:
        raise ValueError("no actions given")
    return best_action


@dataclass(frozen=True)
class RateDistortionPoint:
    slope: float
    rate: float
    distortion: float
    converged: bool = True
    lambda_r: float = 0.0
    lambda_p: float = 0.0


def personalization_distortion(
    relevance: np.ndarray,
    reg_risk: Sequence[float] | np.ndarray,
    privacy: np.ndarray,
    lambda_r: float = 1.0,
    lambda_p: float = 1.0,
) -> np.ndarray:
    """``d[k, c] = 1 - Rel(c, theta_k) + lambda_r Reg(c) + lambda_p Priv(c, theta_k)``."""
    rel = np.asarray(relevance, float)
    return 1.0 - rel + lambda_r * np.asarray(reg_risk, float)[None, :] + lambda_p * np.asarray(privacy, float)


def _rd_iterate(p, dist, slope, tol, max_iters):
    K, C = dist.shape
    q = np.full(C, 1.0 / C)
    converged = False
    for _ in range(max_iters):
        if math.isinf(slope):
            best = dist <= dist.min(axis=1, keepdims=True)
            A = np.where(best, q[None, :], 0.0)
        else:
            with np.errstate(divide="ignore"):
                logA = np.log(q)[None, :] - slope * dist
            A = np.exp(logA - logA.max(axis=1, keepdims=True))
        Q = A / A.sum(axis=1, keepdims=True)
        q_new = p @ Q
        if np.abs(q_new - q).max() < tol:
            q = q_new
            converged = True
            break
        q = q_new
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Q > 0, Q * np.log2(Q / q[None, :]), 0.0)
    rate = max(float(p @ terms.sum(axis=1)), 0.0)
    distortion = float(p @ (Q * dist).sum(axis=1))
    return rate, distortion, converged


def rate_distortion_curve(
    type_dist: Sequence[float] | np.ndarray,
    distortion: np.ndarray,
    slope_grid: Sequence[float],
    tol: float = 1e-12,
    max_iters: int = DEFAULT_MAX_ITERS,
    lambda_r: float = 0.0,
    lambda_p: float = 0.0,
) -> list[RateDistortionPoint]:
    """Blahut-Arimoto rate-distortion points, one per slope, sorted by distortion."""
    p = as_belief(type_dist)
    d = np.asarray(distortion, dtype=float)
    if d.ndim != 2 or d.shape[0] != p.size:
        raise ValueError("distortion must be (K types, C contents)")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("distortion must be finite and non-negative")
    points = []
    for s in slope_grid:
        if s < 0:
            raise ValueError("slopes must be >= 0")
        rate, dist, ok = _rd_iterate(p, d, float(s), tol, max_iters)
        points.append(RateDistortionPoint(float(s), rate, dist, ok, lambda_r, lambda_p))
    points.sort(key=lambda pt: (pt.distortion, -pt.rate))
    return points


def max_useful_distortion(type_dist, distortion) -> float:
    """Smallest distortion reachable at zero rate: ``min_c E_theta d(theta, c)``."""
    p = as_belief(type_dist)
    return float((p @ np.asarray(distortion, float)).min())


def rate_at_distortion(type_dist, distortion, D: float, tol: float = 1e-9) -> float:
    """R(D) by bisection on the slope."""
    p = as_belief(type_dist)
    d = np.asarray(distortion, float)
    if D >= max_useful_distortion(p, d):
        return 0.0
    r_inf, d_inf, _ = _rd_iterate(p, d, math.inf, 1e-14, DEFAULT_MAX_ITERS)
    if D <= d_inf:
        return r_inf
    lo, hi = 0.0, 1.0
    while _rd_iterate(p, d, hi, 1e-13, DEFAULT_MAX_ITERS)[1] > D:
        hi *= 2.0
        if hi > 1e6:
            return r_inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rate, dist, _ = _rd_iterate(p, d, mid, 1e-13, DEFAULT_MAX_ITERS)
        if dist > D:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return _rd_iterate(p, d, hi, 1e-13, DEFAULT_MAX_ITERS)[0]


def curve_is_monotone_convex(points: Sequence[RateDistortionPoint], tol: float = 1e-6) -> bool:
    D = np.array([pt.distortion for pt in points])
    R = np.array([pt.rate for pt in points])
    order = np.argsort(D, kind="stable")
    D, R = D[order], R[order]
    if np.any(np.diff(R) > tol):
        return False
    for i in range(1, len(D) - 1):
        d0, d1, d2 = D[i - 1], D[i], D[i + 1]
        if d2 - d0 <= tol:
            continue
        interp = R[i - 1] + (R[i + 1] - R[i - 1]) * (d1 - d0) / (d2 - d0)
        if R[i] > interp + tol:
            return False
    return True


def curve_csv(points: Sequence[RateDistortionPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "rate_bits", "distortion"])
    for pt in points:
        w.writerow([repr(pt.slope), repr(pt.rate), repr(pt.distortion)])
    return buf.getvalue()


def capacity_csv(rows: Sequence[tuple[str, CapacityResult]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["channel", "capacity_bits", "iterations", "converged", "input_distribution"])
    for name, res in rows:
        w.writerow([
            name, repr(res.capacity), res.iterations, int(res.converged),
            " ".join(repr(float(x)) for x in res.input_distribution),
        ])
    return buf.getvalue()
