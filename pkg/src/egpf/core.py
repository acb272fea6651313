"""Domain types shared across the engine: physician types, beliefs, games.

Beliefs are plain float64 numpy vectors aligned with the ordering of a
:class:`TypeSet`; :func:`validate_belief` and :func:`as_belief` are the
gatekeepers. Payoff tensors are indexed ``[action, response, type]``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

SIMPLEX_TOL = 1e-9

TYPE_FIELDS = ("alpha_E", "alpha_P", "alpha_O", "alpha_F", "beta", "gamma", "delta", "kappa")

# Box used by sample_type_set. beta and kappa are unbounded above in the
# model; these caps keep utilities O(1).
SAMPLING_BOX = {
    "beta": (0.0, 5.0),
    "gamma": (0.0, 1.0),
    "delta": (0.1, 1.0),
    "kappa": (0.0, 5.0),
}

DEFAULT_MAX_REJECTIONS = 10_000


class SeparationInfeasible(ValueError):
    pass


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class TypeVector:
    """Physician archetype: four influence weights on the simplex plus
    risk aversion, inertia, bandwidth and discounting."""

    alpha_E: float
    alpha_P: float
    alpha_O: float
    alpha_F: float
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 1.0
    kappa: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in TYPE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "TypeVector":
        values = [float(v) for v in values]
        if len(values) != len(TYPE_FIELDS):
            raise ValueError(f"expected {len(TYPE_FIELDS)} components, got {len(values)}")
        return cls(*values)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([self.alpha_E, self.alpha_P, self.alpha_O, self.alpha_F])

    def to_dict(self) -> dict[str, float]:
        return {f: getattr(self, f) for f in TYPE_FIELDS}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TypeVector":
        missing = [f for f in TYPE_FIELDS if f not in data]
        if missing:
            raise ValueError(f"type vector missing fields: {', '.join(missing)}")
        return cls(**{f: float(data[f]) for f in TYPE_FIELDS})


UNIT_TYPE = TypeVector(0.25, 0.25, 0.25, 0.25, beta=0.0, gamma=0.0, delta=1.0, kappa=0.0)


def validate_type_vector(theta: TypeVector) -> ValidationReport:
    problems = []
    total = theta.alpha_E + theta.alpha_P + theta.alpha_O + theta.alpha_F
    if abs(total - 1.0) > SIMPLEX_TOL:
        problems.append(f"simplex sum = {total!r} (residual {total - 1.0:.3g})")
    for name in ("alpha_E", "alpha_P", "alpha_O", "alpha_F", "gamma"):
        v = getattr(theta, name)
        if not 0.0 <= v <= 1.0:
            problems.append(f"{name} = {v:.12g} outside [0, 1]")
    for name in ("beta", "kappa"):
        v = getattr(theta, name)
        if not v >= 0.0:
            problems.append(f"{name} = {v:.12g} negative")
    if not 0.0 < theta.delta <= 1.0:
        problems.append(f"delta = {theta.delta:.12g} outside (0, 1]")
    if not all(math.isfinite(getattr(theta, f)) for f in TYPE_FIELDS):
        problems.append("non-finite component")
    return ValidationReport(tuple(problems))


def validate_belief(mu: Iterable[float]) -> ValidationReport:
    w = np.asarray(list(mu) if not isinstance(mu, np.ndarray) else mu, dtype=float)
    problems = []
    if w.ndim != 1 or w.size == 0:
        return ValidationReport(("belief must be a non-empty vector",))
    if not np.all(np.isfinite(w)):
        problems.append("non-finite weight")
    neg = w[w < 0]
    if neg.size:
        problems.append(f"negative weight (min {neg.min():.6g})")
    total = float(w.sum())
    if abs(total - 1.0) > SIMPLEX_TOL:
        problems.append(f"sum != 1 (sum = {total:.12g})")
    return ValidationReport(tuple(problems))


def as_belief(mu: Iterable[float], size: int | None = None) -> np.ndarray:
    """Coerce to a float vector and raise ``ValueError`` unless it is a valid belief."""
    w = np.array(mu, dtype=float)
    report = validate_belief(w)
    if not report.ok:
        raise ValueError("invalid belief: " + "; ".join(report.violations))
    if size is not None and w.size != size:
        raise ValueError(f"belief has {w.size} entries, expected {size}")
    return w


def pairwise_min_distance(types: Sequence[TypeVector]) -> float:
    if len(types) < 2:
        return math.inf
    pts = np.array([t.as_array() for t in types])
    best = math.inf
    for i, j in itertools.combinations(range(len(pts)), 2):
        best = min(best, float(np.linalg.norm(pts[i] - pts[j])))
    return best


@dataclass(frozen=True)
class TypeSet:
    types: tuple[TypeVector, ...]
    separation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        if not self.types:
            raise ValueError("TypeSet needs at least one type")
        for k, t in enumerate(self.types):
            report = validate_type_vector(t)
            if not report.ok:
                raise ValueError(f"type {k} invalid: " + "; ".join(report.violations))
        if len(self.types) > 1 and not pairwise_min_distance(self.types) > self.separation:
            raise ValueError(
                f"types not {self.separation}-separated "
                f"(min distance {pairwise_min_distance(self.types):.6g})"
            )

    def __len__(self) -> int:
        return len(self.types)

    def __getitem__(self, k: int) -> TypeVector:
        return self.types[k]

    def __iter__(self):
        return iter(self.types)

    def matrix(self) -> np.ndarray:
        return np.array([t.as_array() for t in self.types])

    def is_canonical(self) -> bool:
        keys = [(t.alpha_E, t.alpha_P) for t in self.types]
        return keys == sorted(keys)

    def sorted_by_evidence(self) -> bool:
        a = [t.alpha_E for t in self.types]
        return all(x < y for x, y in zip(a, a[1:]))

    def to_dict(self) -> dict[str, Any]:
        return {"types": [t.to_dict() for t in self.types], "separation": self.separation}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TypeSet":
        return cls(
            tuple(TypeVector.from_dict(t) for t in data["types"]),
            float(data.get("separation", 0.0)),
        )


def type_space_diameter() -> float:
    # Simplex part has diameter sqrt(2) (distance between two vertices).
    box = sum((hi - lo) ** 2 for lo, hi in SAMPLING_BOX.values())
    return math.sqrt(2.0 + box)


def _draw_type(rng: np.random.Generator) -> TypeVector:
    alphas = rng.dirichlet(np.ones(4))
    rest = [rng.uniform(*SAMPLING_BOX[name]) for name in ("beta", "gamma", "delta", "kappa")]
    return TypeVector(*alphas.tolist(), *rest)


def sample_type_set(
    K: int,
    epsilon: float,
    seed: int,
    max_rejections: int = DEFAULT_MAX_REJECTIONS,
) -> TypeSet:
    """Rejection-sample ``K`` epsilon-separated types, returned in canonical order.

    Raises :class:`SeparationInfeasible` once ``max_rejections`` candidates
    have been rejected.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if K > 1 and epsilon >= type_space_diameter():
        raise SeparationInfeasible(
            f"separation infeasible: epsilon={epsilon} >= type-space diameter "
            f"{type_space_diameter():.4f}"
        )
    rng = np.random.default_rng(seed)
    accepted: list[TypeVector] = []
    points: list[np.ndarray] = []
    rejections = 0
    while len(accepted) < K:
        cand = _draw_type(rng)
        x = cand.as_array()
        if all(np.linalg.norm(x - p) > epsilon for p in points):
            accepted.append(cand)
            points.append(x)
            continue
        rejections += 1
        if rejections >= max_rejections:
            raise SeparationInfeasible(
                f"separation infeasible: {rejections} rejections with {len(accepted)}/{K} types placed"
            )
    accepted.sort(key=lambda t: (t.alpha_E, t.alpha_P))
    return TypeSet(tuple(accepted), float(epsilon))


@dataclass(frozen=True)
class UtilityFeatures:
    """Per-action and per-response scores feeding the physician utility.

    ``outcome`` is indexed ``[action, response]``; ``access`` by response;
    ``switch[d, d_prev]`` is 1 when moving from ``d_prev`` to ``d``.
    """

    evidence: np.ndarray
    peer: np.ndarray
    outcome: np.ndarray
    access: np.ndarray
    variance: np.ndarray
    load: np.ndarray
    switch: np.ndarray | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                object.__setattr__(self, f.name, np.asarray(v, dtype=float))
        if self.switch is None:
            L = self.access.shape[0]
            object.__setattr__(self, "switch", 1.0 - np.eye(L))
        report = self.validate()
        if not report.ok:
            raise ValueError("invalid utility features: " + "; ".join(report.violations))

    @property
    def n_actions(self) -> int:
        return self.evidence.shape[0]

    @property
    def n_responses(self) -> int:
        return self.access.shape[0]

    def validate(self) -> ValidationReport:
        problems = []
        M, L = self.evidence.shape[0], self.access.shape[0]
        shapes = {
            "peer": (M,), "outcome": (M, L), "variance": (M,), "load": (M,), "switch": (L, L),
        }
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                problems.append(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in ("evidence", "peer", "outcome", "access"):
            v = getattr(self, name)
            if np.any((v < 0) | (v > 1)):
                problems.append(f"{name} scores outside [0, 1]")
        for name in ("variance", "load"):
            if np.any(getattr(self, name) < 0):
                problems.append(f"{name} negative")
        if not np.all(np.isin(self.switch, (0.0, 1.0))):
            problems.append("switch indicator not in {0, 1}")
        return ValidationReport(tuple(problems))


def _tensor(values: Any, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    if arr.ndim != 3:
        raise ValueError(f"{name} must be a 3-d tensor [action][response][type]")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class GameSpec:
    type_set: TypeSet
    pharma_actions: tuple[str, ...]
    physician_responses: tuple[str, ...]
    u_P: np.ndarray
    u_D: np.ndarray
    prior: np.ndarray
    tau: float = 3.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pharma_actions", tuple(self.pharma_actions))
        object.__setattr__(self, "physician_responses", tuple(self.physician_responses))
        object.__setattr__(self, "u_P", _tensor(self.u_P, "u_P"))
        object.__setattr__(self, "u_D", _tensor(self.u_D, "u_D"))
        prior = as_belief(self.prior)
        prior.setflags(write=False)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "tau", float(self.tau))
        M, L, K = len(self.pharma_actions), len(self.physician_responses), len(self.type_set)
        for name in ("u_P", "u_D"):
            if getattr(self, name).shape != (M, L, K):
                raise ValueError(
                    f"{name} has shape {getattr(self, name).shape}, expected {(M, L, K)}"
                )
        if prior.size != K:
            raise ValueError(f"prior has {prior.size} entries, expected {K}")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if len(set(self.pharma_actions)) != M or len(set(self.physician_responses)) != L:
            raise ValueError("action and response ids must be unique")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.u_P.shape

    @property
    def n_types(self) -> int:
        return len(self.type_set)

    def action_index(self, action: int | str) -> int:
        if isinstance(action, (int, np.integer)):
            if not 0 <= action < len(self.pharma_actions):
                raise IndexError(f"action index {action} out of range")
            return int(action)
        return self.pharma_actions.index(action)

    def response_index(self, response: int | str) -> int:
        if isinstance(response, (int, np.integer)):
            if not 0 <= response < len(self.physician_responses):
                raise IndexError(f"response index {response} out of range")
            return int(response)
        return self.physician_responses.index(response)

    def replace(self, **changes) -> "GameSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "types": [t.to_dict() for t in self.type_set],
            "separation": self.type_set.separation,
            "pharma_actions": list(self.pharma_actions),
            "physician_responses": list(self.physician_responses),
            "u_P": self.u_P.tolist(),
            "u_D": self.u_D.tolist(),
            "prior": self.prior.tolist(),
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GameSpec":
        type_set = TypeSet(
            tuple(TypeVector.from_dict(t) for t in data["types"]),
            float(data.get("separation", 0.0)),
        )
        return cls(
            type_set=type_set,
            pharma_actions=tuple(data["pharma_actions"]),
            physician_responses=tuple(data["physician_responses"]),
            u_P=data["u_P"],
            u_D=data["u_D"],
            prior=data["prior"],
            tau=float(data["tau"]),
            name=data.get("name", ""),
        )

    def to_json(self, indent: int | None = 2) -> str:
        # repr-exact floats: json emits shortest round-tripping repr
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "GameSpec":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GameSpec":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def games_equal(a: GameSpec, b: GameSpec) -> bool:
    return (
        a.type_set == b.type_set
        and a.pharma_actions == b.pharma_actions
        and a.physician_responses == b.physician_responses
        and np.array_equal(a.u_P, b.u_P)
        and np.array_equal(a.u_D, b.u_D)
        and np.array_equal(a.prior, b.prior)
        and a.tau == b.tau
    )

