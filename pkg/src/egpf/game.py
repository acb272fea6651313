"""Utilities, quantal response, equilibria and mechanism auditing.

Actions, responses and types are addressed by integer index into the
``GameSpec`` orderings. Ties are always broken toward the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal, Sequence

import numpy as np

from .core import GameSpec, TypeSet, TypeVector, UtilityFeatures, as_belief

Responder = Literal["best_response", "qre"]

IC_TOL = 1e-12


def physician_utility(
    features: UtilityFeatures,
    action: int,
    response: int,
    prev_response: int,
    theta: TypeVector,
) -> float:
    if not theta.delta > 0:
        raise ZeroDivisionError("bandwidth delta must be > 0")
    f = features
    return (
        theta.alpha_E * f.evidence[action]
        + theta.alpha_P * f.peer[action]
        + theta.alpha_O * f.outcome[action, response]
        + theta.alpha_F * f.access[response]
        - theta.beta * f.variance[action]
        - theta.gamma * f.switch[response, prev_response]
        - f.load[action] / theta.delta
    )


def pharma_utility(
    revenue: float,
    cost: float,
    ltv: float,
    reg_risk: float,
    info_gain: float,
    weights: tuple[float, float, float] = (1.0, 1.0, 0.3),
) -> float:
    lam, psi, omega = weights
    return revenue - cost + lam * ltv - psi * reg_risk + omega * info_gain


def physician_payoff_tensor(
    features: UtilityFeatures, type_set: TypeSet, prev_response: int = 0
) -> np.ndarray:
    """Fill ``u_D[a, d, k]`` from feature scores, relative to a fixed previous response."""
    M, L, K = features.n_actions, features.n_responses, len(type_set)
    out = np.empty((M, L, K))
    for a in range(M):
        for d in range(L):
            for k, theta in enumerate(type_set):
                out[a, d, k] = physician_utility(features, a, d, prev_response, theta)
    return out


def pharma_payoff_tensor(
    revenue: Sequence[float],
    cost: Sequence[float],
    ltv: np.ndarray,
    reg_risk: Sequence[float],
    info_gain: np.ndarray | None = None,
    weights: tuple[float, float, float] = (1.0, 1.0, 0.3),
) -> np.ndarray:
    """``u_P[a, d, k]`` from revenue R(d), cost C(a), LTV(d, k), Reg(a) and I_gain(a, d)."""
    revenue = np.asarray(revenue, float)
    cost = np.asarray(cost, float)
    ltv = np.asarray(ltv, float)
    reg_risk = np.asarray(reg_risk, float)
    M, L, K = cost.size, revenue.size, ltv.shape[1]
    if info_gain is None:
        info_gain = np.zeros((M, L))
    out = np.empty((M, L, K))
    for a in range(M):
        for d in range(L):
            for k in range(K):
                out[a, d, k] = pharma_utility(
                    revenue[d], cost[a], ltv[d, k], reg_risk[a], info_gain[a, d], weights
                )
    return out


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.asarray(z, float)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def qre_distribution(game: GameSpec, action: int, type_index: int) -> np.ndarray:
    """Logit response probabilities P(d | a, theta_k) at rationality ``game.tau``."""
    return softmax(game.tau * game.u_D[action, :, type_index])


def qre_channel(game: GameSpec) -> np.ndarray:
    """All QRE likelihoods at once, shape ``(M, L, K)``."""
    return softmax(game.tau * game.u_D, axis=1)


def best_response(game: GameSpec, action: int, type_index: int) -> int:
    return int(np.argmax(game.u_D[action, :, type_index]))


def best_responses(game: GameSpec) -> np.ndarray:
    """``BR[a, k]``; ``np.argmax`` returns the first maximiser, i.e. the lowest index."""
    return np.argmax(game.u_D, axis=1)


def leader_values(game: GameSpec, responder: Responder = "best_response") -> np.ndarray:
    """``V[a, k]``: pharma payoff when type k answers action a."""
    if responder == "best_response":
        br = best_responses(game)
        M, K = br.shape
        return game.u_P[np.arange(M)[:, None], br, np.arange(K)[None, :]]
    if responder == "qre":
        return np.einsum("adk,adk->ak", qre_channel(game), game.u_P)
    raise ValueError(f"unknown responder {responder!r}")


def expected_pharma_utility(
    game: GameSpec,
    action: int,
    mu: Sequence[float] | np.ndarray,
    responder: Responder = "best_response",
) -> float:
    mu = as_belief(mu, game.n_types)
    if responder == "best_response":
        total = 0.0
        for k in range(game.n_types):
            d = best_response(game, action, k)
            total += mu[k] * game.u_P[action, d, k]
        return float(total)
    if responder == "qre":
        total = 0.0
        for k in range(game.n_types):
            total += mu[k] * float(qre_distribution(game, action, k) @ game.u_P[action, :, k])
        return float(total)
    raise ValueError(f"unknown responder {responder!r}")


def expected_pharma_utilities(
    game: GameSpec, mu: Sequence[float] | np.ndarray, responder: Responder = "best_response"
) -> np.ndarray:
    return np.array(
        [expected_pharma_utility(game, a, mu, responder) for a in range(len(game.pharma_actions))]
    )


@dataclass(frozen=True)
class StrategyProfile:
    """Pharma mixed strategy over actions plus physician response
    distributions ``physician[a, k, d]``."""

    pharma: np.ndarray
    physician: np.ndarray

    def __post_init__(self):
        for name in ("pharma", "physician"):
            arr = np.array(getattr(self, name), dtype=float)
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=-1) - 1.0) > 1e-9):
                raise ValueError(f"{name} strategy is not a distribution")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def support(self) -> list[int]:
        return [int(a) for a in np.flatnonzero(self.pharma > 0)]

    def leader_payoff(self, game: GameSpec, mu: Sequence[float] | None = None) -> float:
        mu = game.prior if mu is None else as_belief(mu, game.n_types)
        payoff_ak = np.einsum("akd,adk->ak", self.physician, game.u_P)
        return float(self.pharma @ (payoff_ak @ mu))

    def to_dict(self, game: GameSpec | None = None) -> dict[str, Any]:
        out: dict[str, Any] = {
            "pharma_strategy": self.pharma.tolist(),
            "physician_strategy": self.physician.tolist(),
        }
        if game is not None:
            out["pharma_actions"] = list(game.pharma_actions)
            out["physician_responses"] = list(game.physician_responses)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StrategyProfile":
        return cls(np.array(data["pharma_strategy"]), np.array(data["physician_strategy"]))


def solve_bne(game: GameSpec, mu: Sequence[float] | None = None) -> StrategyProfile:
    """Enumerate the finite game: exact physician best responses, then
    the pharma action(s) maximising expected payoff under ``mu`` (prior by
    default). Several maximisers share the pharma mass uniformly."""
    mu = game.prior if mu is None else as_belief(mu, game.n_types)
    M, L, K = game.shape
    br = best_responses(game)
    physician = np.zeros((M, K, L))
    physician[np.arange(M)[:, None], np.arange(K)[None, :], br] = 1.0
    eu = leader_values(game) @ mu
    winners = np.flatnonzero(eu == eu.max())
    pharma = np.zeros(M)
    pharma[winners] = 1.0 / winners.size
    return StrategyProfile(pharma, physician)


def solve_stackelberg(game: GameSpec, mu: Sequence[float] | None = None) -> tuple[int, float]:
    """Leader commitment against per-type best responses: ``(action, payoff)``."""
    mu = game.prior if mu is None else as_belief(mu, game.n_types)
    eu = leader_values(game) @ mu
    a = int(np.argmax(eu))
    return a, float(eu[a])


def profitable_deviations(game: GameSpec, profile: StrategyProfile, mu=None, tol: float = 1e-12):
    """Brute-force list of unilateral deviations that would pay off.

    Entries are ``("pharma", a, gain)`` or ``("physician", (a, k, d), gain)``.
    """
    mu = game.prior if mu is None else as_belief(mu, game.n_types)
    M, L, K = game.shape
    found = []
    current = profile.leader_payoff(game, mu)
    for a in range(M):
        pure = np.zeros(M)
        pure[a] = 1.0
        alt = StrategyProfile(pure, profile.physician).leader_payoff(game, mu)
        if alt > current + tol:
            found.append(("pharma", a, alt - current))
    for a in range(M):
        for k in range(K):
            now = float(profile.physician[a, k] @ game.u_D[a, :, k])
            for d in range(L):
                if game.u_D[a, d, k] > now + tol:
                    found.append(("physician", (a, k, d), game.u_D[a, d, k] - now))
    return found


@dataclass(frozen=True)
class Mechanism:
    """Allocation rule g (type -> action), transfers t added to the physician's
    utility, and outside options."""

    allocation: tuple[int, ...]
    transfers: tuple[float, ...]
    outside_option: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "allocation", tuple(int(a) for a in self.allocation))
        object.__setattr__(self, "transfers", tuple(float(t) for t in self.transfers))
        if self.outside_option is None:
            object.__setattr__(self, "outside_option", tuple(-np.inf for _ in self.allocation))
        else:
            object.__setattr__(self, "outside_option", tuple(float(u) for u in self.outside_option))
        n = len(self.allocation)
        if len(self.transfers) != n or len(self.outside_option) != n:
            raise ValueError("allocation, transfers and outside_option must cover the same types")
        if not all(np.isfinite(self.transfers)):
            raise ValueError("transfers must be finite")

    def to_dict(self) -> dict[str, Any]:
        return {
            "allocation": list(self.allocation),
            "transfers": list(self.transfers),
            "outside_option": [None if not np.isfinite(u) else u for u in self.outside_option],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Mechanism":
        outside = data.get("outside_option")
        if outside is not None:
            outside = tuple(-np.inf if u is None else u for u in outside)
        return cls(tuple(data["allocation"]), tuple(data["transfers"]), outside)


@dataclass(frozen=True)
class MechanismAudit:
    ic_violations: tuple[tuple[int, int, float], ...]
    ir_violations: tuple[tuple[int, float], ...]
    ic_slack: np.ndarray
    ir_slack: np.ndarray

    @property
    def passed(self) -> bool:
        return not self.ic_violations and not self.ir_violations


def report_values(game: GameSpec) -> np.ndarray:
    """``v[k, a] = max_d u_D(a, d, theta_k)``: type k's value for receiving action a."""
    return game.u_D.max(axis=1).T


def audit_mechanism(game: GameSpec, mech: Mechanism, tol: float = IC_TOL) -> MechanismAudit:
    """Evaluate all K^2 truth-telling and K participation constraints.

    ``ic_slack[k, j]`` is type k's margin for reporting truthfully rather than
    as type j; a constraint is violated when its slack is below ``-tol``.
    """
    K = game.n_types
    if len(mech.allocation) != K:
        raise ValueError(f"allocation covers {len(mech.allocation)} types, game has {K}")
    v = report_values(game)
    g = np.array(mech.allocation)
    t = np.array(mech.transfers)
    truthful = v[np.arange(K), g] + t
    ic_slack = truthful[:, None] - (v[:, g] + t[None, :])
    ir_slack = truthful - np.array(mech.outside_option)
    ic = tuple(
        (k, j, float(ic_slack[k, j]))
        for k in range(K)
        for j in range(K)
        if k != j and ic_slack[k, j] < -tol
    )
    ir = tuple((k, float(ir_slack[k])) for k in range(K) if ir_slack[k] < -tol)
    return MechanismAudit(ic, ir, ic_slack, ir_slack)


def derive_transfers(game: GameSpec, allocation: Sequence[int], base_transfer: float = 0.0) -> tuple[float, ...]:
    """Envelope transfers along the evidence-sensitivity ordering.

    Returned transfers are *added* to the physician's utility, so each step
    subtracts the telescoping increment
    ``v(theta_j, g(theta_{j+1})) - v(theta_j, g(theta_j))``; this makes every
    adjacent upward truth-telling constraint bind.
    """
    if not game.type_set.sorted_by_evidence():
        raise ValueError("types must be sorted by strictly ascending alpha_E")
    g = [int(a) for a in allocation]
    if len(g) != game.n_types:
        raise ValueError("allocation must cover every type")
    v = report_values(game)
    out = [float(base_transfer)]
    for j in range(len(g) - 1):
        out.append(out[-1] - (v[j, g[j + 1]] - v[j, g[j]]))
    return tuple(out)
