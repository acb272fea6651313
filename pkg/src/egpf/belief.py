"""Posterior updates, entropies, divergences and windowed drift detection.

All information quantities are in bits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .core import as_belief

_ALPHA_ONE_TOL = 1e-12


class ZeroEvidenceError(ValueError):
    """Every type assigns zero probability to the observation."""


class AbsoluteContinuityError(ValueError):
    pass


def bayes_update(mu: Sequence[float] | np.ndarray, likelihoods: Sequence[float] | np.ndarray) -> np.ndarray:
    mu = as_belief(mu)
    lik = np.asarray(likelihoods, dtype=float)
    if lik.shape != mu.shape:
        raise ValueError(f"likelihood vector has shape {lik.shape}, belief {mu.shape}")
    if np.any(lik < 0) or not np.all(np.isfinite(lik)):
        raise ValueError("likelihoods must be finite and non-negative")
    if lik.size and lik[0] > 0 and np.all(lik == lik[0]):
        return mu.copy()  # uninformative observation: skip renormalisation round-off
    joint = mu * lik
    total = joint.sum()
    if not total > 0:
        raise ZeroEvidenceError("zero evidence: observation impossible under every type")
    return joint / total


def entropy(mu: Sequence[float] | np.ndarray, alpha: float = 1.0) -> float:
    """Renyi entropy of order ``alpha`` in bits; ``alpha == 1`` is Shannon."""
    p = as_belief(mu)
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    nz = p[p > 0]
    if abs(alpha - 1.0) < _ALPHA_ONE_TOL:
        return float(-(nz * np.log2(nz)).sum()) + 0.0
    if alpha == 0:
        return math.log2(nz.size)
    if math.isinf(alpha):
        return -math.log2(nz.max())
    return float(math.log2(float((nz**alpha).sum())) / (1.0 - alpha)) + 0.0


def divergence(p: Sequence[float] | np.ndarray, q: Sequence[float] | np.ndarray, alpha: float = 1.0) -> float:
    """KL (``alpha == 1``) or Renyi divergence D_alpha(p || q) in bits."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("p and q must share a support")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    mask = p > 0
    if (abs(alpha - 1.0) < _ALPHA_ONE_TOL or alpha > 1) and np.any(q[mask] <= 0):
        raise AbsoluteContinuityError("absolute continuity violated: q = 0 where p > 0")
    if abs(alpha - 1.0) < _ALPHA_ONE_TOL:
        val = float((p[mask] * np.log2(p[mask] / q[mask])).sum())
    else:
        both = mask & (q > 0)
        s = float((p[both] ** alpha * q[both] ** (1.0 - alpha)).sum())
        if s <= 0:
            raise AbsoluteContinuityError("disjoint supports")
        val = math.log2(s) / (alpha - 1.0)
    return max(val, 0.0)


def total_variation(p: Sequence[float] | np.ndarray, q: Sequence[float] | np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


@dataclass(frozen=True)
class Interaction:
    action: int
    response: int
    t: int


@dataclass(frozen=True)
class InteractionHistory:
    records: tuple[Interaction, ...] = ()

    def __post_init__(self):
        recs = tuple(r if isinstance(r, Interaction) else Interaction(*r) for r in self.records)
        object.__setattr__(self, "records", recs)
        ts = [r.t for r in recs]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.records)

    def append(self, action: int, response: int, t: int | None = None) -> "InteractionHistory":
        if t is None:
            t = self.records[-1].t + 1 if self.records else 1
        return InteractionHistory(self.records + (Interaction(int(action), int(response), int(t)),))

    def tail(self, n: int) -> tuple[Interaction, ...]:
        return self.records[-n:] if n > 0 else ()

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "InteractionHistory":
        return cls(tuple(Interaction(int(a), int(d), t) for t, (a, d) in enumerate(pairs, start=1)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "action", "response"])
        for r in self.records:
            w.writerow([r.t, r.action, r.response])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "InteractionHistory":
        rows = csv.DictReader(io.StringIO(text))
        return cls(tuple(Interaction(int(r["action"]), int(r["response"]), int(r["t"])) for r in rows))

    def to_json(self) -> str:
        return json.dumps({"records": [asdict(r) for r in self.records]})

    @classmethod
    def from_json(cls, text: str) -> "InteractionHistory":
        return cls(tuple(Interaction(**r) for r in json.loads(text)["records"]))


@dataclass(frozen=True)
class DriftReport:
    statistic: float
    threshold: float
    window: int
    alpha: float = 1.0

    @property
    def triggered(self) -> bool:
        return bool(self.statistic > self.threshold)

    def to_dict(self) -> dict[str, Any]:
        return {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "triggered": self.triggered,
            "window": self.window,
            "alpha": self.alpha,
        }


def predictive_channel(model: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Mixture response distribution ``P(d | a) = sum_k mu_k P(d | a, theta_k)``.

    ``model`` is ``(M, L, K)`` per-type or already ``(M, L)``.
    """
    model = np.asarray(model, dtype=float)
    if model.ndim == 2:
        return model
    return model @ mu


def window_statistic(
    actions: Sequence[int],
    responses: Sequence[int],
    predicted: np.ndarray,
    alpha: float = 1.0,
    smoothing: float | None = None,
) -> float:
    """Action-frequency-weighted divergence between smoothed per-action
    response histograms and the predicted response distributions."""
    W = len(actions)
    M, L = predicted.shape
    s = 1.0 / W if smoothing is None else smoothing
    counts = np.zeros((M, L))
    for a, d in zip(actions, responses):
        counts[a, d] += 1.0
    total = 0.0
    for a in range(M):
        n_a = counts[a].sum()
        if n_a == 0:
            continue
        emp = (counts[a] / n_a + s) / (1.0 + L * s)
        total += (n_a / W) * divergence(emp, predicted[a], alpha)
    return total


def drift_detect(
    history: InteractionHistory,
    model: np.ndarray,
    mu: Sequence[float] | np.ndarray,
    W: int = 30,
    tau_drift: float = 0.15,
    alpha: float = 1.0,
    smoothing: float | None = None,
) -> DriftReport:
    """Compare the last ``W`` responses with what the model predicts under ``mu``.

    Histograms get ``smoothing`` (default ``1/W``) added to every frequency
    before renormalising, so zero counts never reach the divergence.
    """
    if W < 1:
        raise ValueError("window W must be >= 1")
    if len(history) < W:
        raise ValueError(f"history has {len(history)} records, window needs {W}")
    mu = as_belief(mu)
    recent = history.tail(W)
    predicted = predictive_channel(model, mu)
    stat = window_statistic(
        [r.action for r in recent], [r.response for r in recent], predicted, alpha, smoothing
    )
    return DriftReport(stat, float(tau_drift), int(W), float(alpha))
