"""Compositional consistency checks at the belief level.

Likelihood vectors act as morphisms on beliefs through Bayes' rule; the
functions here measure how far concrete data are from the identities
that composition, transfer between domains, and multi-scale aggregation
should satisfy. All distances are total variation, ``||p - q||_1 / 2``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .belief import bayes_update, total_variation
from .core import SIMPLEX_TOL, TypeVector, as_belief

COMPOSITION_TOL = 1e-9

DEFAULT_SCALES = ("interaction", "weekly", "monthly", "quarterly")


@dataclass(frozen=True)
class BeliefUpdateMap:
    likelihood: np.ndarray

    def __post_init__(self):
        lik = np.array(self.likelihood, dtype=float)
        if lik.ndim != 1 or np.any(lik < 0) or not np.all(np.isfinite(lik)):
            raise ValueError("likelihood must be a finite non-negative vector")
        if not lik.any():
            raise ValueError("likelihood must not be identically zero")
        lik.setflags(write=False)
        object.__setattr__(self, "likelihood", lik)

    def __call__(self, mu) -> np.ndarray:
        return bayes_update(mu, self.likelihood)

    def then(self, other: "BeliefUpdateMap") -> "BeliefUpdateMap":
        """Single map equivalent to applying ``self`` and then ``other``."""
        return BeliefUpdateMap(self.likelihood * other.likelihood)

    @classmethod
    def identity(cls, K: int) -> "BeliefUpdateMap":
        return cls(np.ones(K))


@dataclass(frozen=True)
class FunctorLawReport:
    residual_identity: float
    residual_composition: float

    def holds(self, tol: float = 1e-12) -> bool:
        return self.residual_identity <= tol and self.residual_composition <= tol


def functor_law_check(mu, f: BeliefUpdateMap, g: BeliefUpdateMap) -> FunctorLawReport:
    mu = as_belief(mu)
    ident = bayes_update(mu, np.ones_like(mu))
    sequential = g(f(mu))
    batched = f.then(g)(mu)
    return FunctorLawReport(total_variation(ident, mu), total_variation(sequential, batched))


def tensor_compose(
    theta1: TypeVector,
    theta2: TypeVector,
    w: float | Callable[[object], float],
    context: object = None,
) -> TypeVector:
    """Convex mixture ``w(x) theta1 + (1 - w(x)) theta2``, componentwise."""
    weight = float(w(context)) if callable(w) else float(w)
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"mixing weight {weight} outside [0, 1]")
    mixed = weight * theta1.as_array() + (1.0 - weight) * theta2.as_array()
    return TypeVector.from_array(mixed)


@dataclass(frozen=True)
class TransferMap:
    """Row-stochastic ``(K_src, K_dst)`` matrix moving beliefs across domains."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or np.any(m < 0):
            raise ValueError("transfer matrix must be 2-d and non-negative")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise ValueError("transfer matrix rows must sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, mu) -> np.ndarray:
        mu = as_belief(mu)
        if mu.size != self.matrix.shape[0]:
            raise ValueError(
                f"dimension mismatch: belief has {mu.size} types, transfer expects {self.matrix.shape[0]}"
            )
        return mu @ self.matrix


def naturality_residual(
    eta: TransferMap,
    f: tuple[BeliefUpdateMap, BeliefUpdateMap],
    mu,
) -> float:
    """Commutativity defect of transfer and update:
    ``TV(eta(update_src(mu)), update_dst(eta(mu)))``."""
    f_src, f_dst = f
    k_src, k_dst = eta.matrix.shape
    if f_src.likelihood.size != k_src or f_dst.likelihood.size != k_dst:
        raise ValueError(
            f"dimension mismatch: transfer is {k_src}x{k_dst}, likelihoods "
            f"{f_src.likelihood.size} and {f_dst.likelihood.size}"
        )
    return total_variation(eta(f_src(mu)), f_dst(eta(mu)))


@dataclass(frozen=True)
class ScalePoset:
    """Chain of temporal scales, finest first, with linear restriction maps.

    ``restrictions[(U, V)]`` is a ``(K, K)`` row-stochastic matrix taking a
    belief at coarse scale ``U`` to fine scale ``V``. Missing pairs default
    to the identity (averaging a single belief returns it unchanged); the
    composition law is checked on construction.
    """

    scales: tuple[str, ...] = DEFAULT_SCALES
    K: int = 3
    restrictions: Mapping[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(self.scales))
        if len(set(self.scales)) != len(self.scales):
            raise ValueError("scales must be distinct")
        maps = {}
        for (u, v), m in dict(self.restrictions).items():
            if u not in self.scales or v not in self.scales or not self.leq(v, u):
                raise ValueError(f"restriction ({u}, {v}) is not a refinement in this poset")
            m = np.array(m, dtype=float)
            if m.shape != (self.K, self.K) or np.any(np.abs(m.sum(axis=1) - 1.0) > SIMPLEX_TOL):
                raise ValueError(f"restriction ({u}, {v}) must be a row-stochastic {self.K}x{self.K} matrix")
            maps[(u, v)] = m
        for u, v in self.pairs():
            maps.setdefault((u, v), np.eye(self.K))
        object.__setattr__(self, "restrictions", maps)
        self.check_composition()

    def leq(self, v: str, u: str) -> bool:
        return self.scales.index(v) <= self.scales.index(u)

    def pairs(self) -> list[tuple[str, str]]:
        """Strictly comparable ``(U, V)`` with ``V < U``."""
        return [(u, v) for i, u in enumerate(self.scales) for v in self.scales[:i]]

    def restrict(self, u: str, v: str, mu) -> np.ndarray:
        if u == v:
            return as_belief(mu)
        return as_belief(mu) @ self.restrictions[(u, v)]

    def check_composition(self, tol: float = COMPOSITION_TOL) -> None:
        for w_, v, u in itertools.combinations(self.scales, 3):
            direct = self.restrictions[(u, w_)]
            chained = self.restrictions[(u, v)] @ self.restrictions[(v, w_)]
            if np.abs(direct - chained).max() > tol:
                raise ValueError(f"restriction composition fails on chain {w_} <= {v} <= {u}")


def aggregate_beliefs(beliefs: Sequence, weights: Sequence[float] | None = None) -> np.ndarray:
    """Coarse-scale belief as the (weighted) average of finer-scale records."""
    arr = np.array([as_belief(b) for b in beliefs])
    w = np.ones(len(arr)) if weights is None else np.asarray(weights, float)
    return (w / w.sum()) @ arr


def sheaf_terms(beliefs: Mapping[str, Sequence[float]], poset: ScalePoset) -> dict[str, float]:
    missing = [s for s in poset.scales if s not in beliefs]
    if missing:
        raise KeyError(f"missing belief for scale(s): {', '.join(missing)}")
    return {
        f"{u}>{v}": total_variation(poset.restrict(u, v, beliefs[u]), as_belief(beliefs[v])) ** 2
        for u, v in poset.pairs()
    }


def sheaf_loss(beliefs: Mapping[str, Sequence[float]], poset: ScalePoset) -> float:
    return float(sum(sheaf_terms(beliefs, poset).values()))


def sheaf_report_json(beliefs: Mapping[str, Sequence[float]], poset: ScalePoset) -> str:
    terms = sheaf_terms(beliefs, poset)
    return json.dumps({"pairs": terms, "loss": sum(terms.values())}, indent=2, sort_keys=True)


def naturality_report_json(eta: TransferMap, f, mus: Mapping[str, Sequence[float]]) -> str:
    out = {name: naturality_residual(eta, f, mu) for name, mu in mus.items()}
    return json.dumps({"residuals": out, "max": max(out.values()) if out else 0.0}, indent=2, sort_keys=True)
