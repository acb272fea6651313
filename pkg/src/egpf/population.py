"""Replicator dynamics over physician-type shares.

Fitness of type k under a pharma strategy is its best-response utility;
scenario events are payoff patches applied from their timestamp on.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import kernels
from .core import SIMPLEX_TOL, GameSpec, as_belief
from .game import report_values, solve_stackelberg

SigmaP = Union[int, Sequence[float], np.ndarray]
Policy = Union[SigmaP, Callable[[float, np.ndarray, GameSpec], SigmaP]]

DEFAULT_DT = 0.05


class StepTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PopulationState:
    shares: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        x = as_belief(self.shares)
        x.setflags(write=False)
        object.__setattr__(self, "shares", x)


@dataclass(frozen=True)
class PayoffPatch:
    """Additive change to the payoff tensors taking effect at ``time``."""

    time: float
    event_id: str
    u_D_delta: np.ndarray | None = None
    u_P_delta: np.ndarray | None = None

    def apply(self, game: GameSpec) -> GameSpec:
        changes = {}
        if self.u_D_delta is not None:
            changes["u_D"] = game.u_D + np.asarray(self.u_D_delta, float)
        if self.u_P_delta is not None:
            changes["u_P"] = game.u_P + np.asarray(self.u_P_delta, float)
        return game.replace(**changes)

    @classmethod
    def boost_type(cls, game: GameSpec, time: float, event_id: str, type_index: int, amount: float,
                   response: int | None = None) -> "PayoffPatch":
        """Raise type ``type_index``'s utility by ``amount`` (for one response or all)."""
        delta = np.zeros(game.shape)
        if response is None:
            delta[:, :, type_index] = amount
        else:
            delta[:, response, type_index] = amount
        return cls(time, event_id, delta)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    events: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> PopulationState:
        return PopulationState(self.states[i], float(self.times[i]))

    def to_csv(self) -> str:
        K = self.states.shape[1]
        marks: dict[int, list[str]] = {}
        for t, eid in self.events:
            i = int(np.searchsorted(self.times, t - 1e-12))
            marks.setdefault(i, []).append(eid)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{k + 1}" for k in range(K)] + ["event"])
        for i, (t, x) in enumerate(zip(self.times, self.states)):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [";".join(marks.get(i, []))])
        return buf.getvalue()


def _sigma_vector(sigma_P: SigmaP, M: int) -> np.ndarray:
    if isinstance(sigma_P, (int, np.integer)):
        out = np.zeros(M)
        out[int(sigma_P)] = 1.0
        return out
    return as_belief(sigma_P, M)


def fitness(x, game: GameSpec, sigma_P: SigmaP) -> tuple[np.ndarray, float]:
    """Per-type best-response utility under ``sigma_P`` and the population mean."""
    x = as_belief(x.shares if isinstance(x, PopulationState) else x, game.n_types)
    sigma = _sigma_vector(sigma_P, len(game.pharma_actions))
    f = sigma @ report_values(game).T
    return f, float(x @ f)


def replicator_step(x, fitness_vec, dt: float = DEFAULT_DT) -> np.ndarray:
    """One explicit Euler step ``x_k += dt x_k (f_k - fbar)``, renormalised."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    x = as_belief(x.shares if isinstance(x, PopulationState) else x)
    f = np.asarray(fitness_vec, float)
    fbar = 0.0
    for k in range(x.size):
        fbar += x[k] * f[k]
    new = x + dt * x * (f - fbar)
    if np.any(new < 0):
        raise StepTooLarge(f"step too large: negative share at dt={dt}; reduce dt")
    return new / new.sum()


def replicator_velocity(x, fitness_vec) -> np.ndarray:
    x = np.asarray(x, float)
    f = np.asarray(fitness_vec, float)
    return x * (f - x @ f)


def stackelberg_policy(t: float, x: np.ndarray, game: GameSpec) -> int:
    """Co-evolution coupling: commit to the Stackelberg action against the
    current population mix used as the belief."""
    return solve_stackelberg(game, x)[0]


def integrate_replicator(
    x0,
    game: GameSpec,
    policy: Policy,
    T: float,
    dt: float = DEFAULT_DT,
    events: Sequence[PayoffPatch] = (),
) -> Trajectory:
    """Euler-integrate shares over ``[0, T]``.

    Fixed pharma strategies run through the compiled kernel; callable
    policies ``policy(t, x, game)`` are stepped in Python since they may
    react to the state.
    """
    x0 = as_belief(x0.shares if isinstance(x0, PopulationState) else x0, game.n_types)
    n = int(round(T / dt))
    times = np.arange(n + 1) * dt
    pending = sorted(events, key=lambda e: e.time)
    M = len(game.pharma_actions)

    # game in force at each step: events apply from the first step with t >= event.time
    segments = []
    current = game
    for i in range(n):
        while pending and times[i] >= pending[0].time - 1e-12:
            current = pending.pop(0).apply(current)
        segments.append(current)
    fired = [(e.time, e.event_id) for e in sorted(events, key=lambda e: e.time) if e.time <= times[-1] + 1e-12]

    if not callable(policy):
        sigma = _sigma_vector(policy, M)
        cache: dict[int, np.ndarray] = {}
        rows = np.empty((n, game.n_types))
        for i, g in enumerate(segments):
            key = id(g)
            if key not in cache:
                cache[key] = sigma @ report_values(g).T
            rows[i] = cache[key]
        try:
            states = kernels.euler_replicator(x0, np.ascontiguousarray(rows), float(dt))
        except ValueError as exc:
            raise StepTooLarge(str(exc)) from None
        return Trajectory(times, states, fired)

    states = np.empty((n + 1, game.n_types))
    states[0] = x0
    x = x0
    for i, g in enumerate(segments):
        f, _ = fitness(x, g, policy(float(times[i]), x, g))
        x = replicator_step(x, f, dt)
        states[i + 1] = x
    return Trajectory(times, states, fired)


def logistic_share(x0: float, gap: float, t: np.ndarray | float) -> np.ndarray | float:
    """Closed-form share of the fitter type in a 2-type game with constant fitness gap."""
    return 1.0 / (1.0 + (1.0 - x0) / x0 * np.exp(-gap * np.asarray(t, float)))


@dataclass(frozen=True)
class ESSReport:
    equilibrium_slack: dict[int, float]
    stability_slack: tuple[float, ...]
    mean_fitness: float

    @property
    def equilibrium_ok(self) -> bool:
        return all(s >= -SIMPLEX_TOL for s in self.equilibrium_slack.values())

    @property
    def stability_ok(self) -> bool:
        return all(s > 0 for s in self.stability_slack)

    @property
    def passed(self) -> bool:
        return self.equilibrium_ok and self.stability_ok


def ess_audit(x_star, game: GameSpec, sigma_star: SigmaP, mutants: Sequence = ()) -> ESSReport:
    """Check (i) no supported type beats the mean and (ii) every mutant
    population has strictly lower mean fitness. Slacks are ``fbar* - f_k``
    and ``fbar* - fbar(y)``."""
    x = as_belief(x_star.shares if isinstance(x_star, PopulationState) else x_star, game.n_types)
    f, fbar = fitness(x, game, sigma_star)
    eq = {k: float(fbar - f[k]) for k in range(x.size) if x[k] > 0}
    stab = []
    for y in mutants:
        y = as_belief(y.shares if isinstance(y, PopulationState) else y, game.n_types)
        stab.append(float(fbar - y @ f))
    return ESSReport(eq, tuple(stab), fbar)
