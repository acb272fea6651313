"""Scenario files: JSON schema validation, line-located errors, and
conversion into :class:`~egpf.sim.ScenarioConfig` plus an optional
population block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from json.decoder import scanstring
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from .core import GameSpec
from .population import PayoffPatch, Policy, Trajectory, integrate_replicator, stackelberg_policy
from .scenarios import market_game, oncology_game
from .sim import LikelihoodOverride, ScenarioConfig

BUILTIN_GAMES = {"oncology": oncology_game, "market": market_game}


class ScenarioError(ValueError):
    """Invalid scenario; ``line`` is 1-based when the offending value was located."""

    def __init__(self, message: str, path: str = "<scenario>", line: int | None = None):
        self.message = message
        self.path = path
        self.line = line
        loc = f"{path}:{line}" if line is not None else path
        super().__init__(f"{loc}: {message}")


def load_schema() -> dict[str, Any]:
    text = resources.files("egpf").joinpath("data/scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


_WS = " \t\r\n"


def _skip_ws(s: str, i: int) -> int:
    while i < len(s) and s[i] in _WS:
        i += 1
    return i


def locate(text: str, path: Sequence[str | int]) -> int:
    """Character offset of the value at ``path`` (deepest reachable prefix)."""
    dec = json.JSONDecoder()
    i = _skip_ws(text, 0)
    for key in path:
        if i >= len(text):
            break
        if text[i] == "{" and isinstance(key, str):
            j = _skip_ws(text, i + 1)
            found = None
            while j < len(text) and text[j] == '"':
                name, j = scanstring(text, j + 1)
                j = _skip_ws(text, j) + 1  # past ':'
                j = _skip_ws(text, j)
                if name == key:
                    found = j
                    break
                _, j = dec.raw_decode(text, j)
                j = _skip_ws(text, j)
                if j < len(text) and text[j] == ",":
                    j = _skip_ws(text, j + 1)
            if found is None:
                break
            i = found
        elif text[i] == "[" and isinstance(key, int):
            j = _skip_ws(text, i + 1)
            for _ in range(key):
                _, j = dec.raw_decode(text, j)
                j = _skip_ws(text, j)
                if j < len(text) and text[j] == ",":
                    j = _skip_ws(text, j + 1)
            i = j
        else:
            break
    return i


def line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


@dataclass(frozen=True)
class PopulationBlock:
    x0: tuple[float, ...]
    T: float
    dt: float
    policy: Policy
    events: tuple[PayoffPatch, ...] = ()

    def run(self, game: GameSpec) -> Trajectory:
        return integrate_replicator(self.x0, game, self.policy, self.T, self.dt, self.events)


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    population: PopulationBlock | None = None
    reconstructed: tuple[str, ...] = ()
    source: dict[str, Any] = field(default_factory=dict)


def _build_game(spec: dict[str, Any]) -> GameSpec:
    if "builtin" in spec:
        game = BUILTIN_GAMES[spec["builtin"]]()
        changes = {k: spec[k] for k in ("tau", "prior") if k in spec}
        return game.replace(**changes) if changes else game
    data = dict(spec)
    data.setdefault("tau", 3.0)
    return GameSpec.from_dict(data)


def _index(value, ids: Sequence[str], what: str) -> int:
    if isinstance(value, int):
        if not 0 <= value < len(ids):
            raise ValueError(f"{what} index {value} out of range (0..{len(ids) - 1})")
        return value
    if value not in ids:
        raise ValueError(f"unknown {what} {value!r}; expected one of {list(ids)}")
    return ids.index(value)


def scenario_from_dict(data: dict[str, Any], path: str = "<scenario>", text: str | None = None) -> Scenario:
    """Validate ``data`` against the schema and build the scenario.

    ``text`` (the raw file) lets errors carry line numbers.
    """

    def fail(message: str, where: Sequence[str | int]):
        line = line_of(text, locate(text, where)) if text is not None else None
        raise ScenarioError(message, path, line)

    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = list(err.absolute_path)
        label = "/".join(str(p) for p in where) or "<root>"
        fail(f"{label}: {err.message}", where)

    try:
        game = _build_game(data["game"])
    except (ValueError, KeyError, IndexError) as exc:
        fail(f"game: {exc}", ["game"])

    actions, responses = game.pharma_actions, game.physician_responses
    forced = []
    for i, r in enumerate(data.get("forced_responses", [])):
        try:
            forced.append(_index(r, responses, "response"))
        except ValueError as exc:
            fail(f"forced_responses/{i}: {exc}", ["forced_responses", i])
    overrides = []
    for i, ov in enumerate(data.get("likelihood_overrides", [])):
        try:
            a = _index(ov["action"], actions, "action")
            d = _index(ov["response"], responses, "response")
        except ValueError as exc:
            fail(f"likelihood_overrides/{i}: {exc}", ["likelihood_overrides", i])
        if len(ov["values"]) != game.n_types:
            fail(f"likelihood_overrides/{i}/values: expected {game.n_types} values", ["likelihood_overrides", i, "values"])
        overrides.append(LikelihoodOverride(a, d, tuple(float(v) for v in ov["values"])))

    true_type = data.get("true_type")
    if true_type is not None and true_type >= game.n_types:
        fail(f"true_type: index {true_type} out of range (0..{game.n_types - 1})", ["true_type"])

    keys = ("horizon", "tau_explore", "tau_drift", "window", "drift_alpha",
            "drift_smoothing", "epsilon_scale", "seed", "replications")
    try:
        config = ScenarioConfig(
            game=game,
            true_type_index=true_type,
            forced_responses=tuple(forced),
            likelihood_overrides=tuple(overrides),
            name=data.get("name", ""),
            **{k: data[k] for k in keys if k in data},
        )
    except ValueError as exc:
        fail(str(exc), [])

    population = None
    if "population" in data:
        population = _population_block(data["population"], game, fail)
    return Scenario(config, population, tuple(data.get("reconstructed", ())), data)


def _population_block(pop: dict[str, Any], game: GameSpec, fail) -> PopulationBlock:
    base = ["population"]
    x0 = pop.get("x0", list(game.prior))
    if len(x0) != game.n_types:
        fail(f"population/x0: expected {game.n_types} shares", base + ["x0"])
    raw = pop.get("policy", "stackelberg")
    policy: Policy
    if raw == "stackelberg":
        policy = stackelberg_policy
    elif isinstance(raw, list):
        if len(raw) != len(game.pharma_actions):
            fail("population/policy: mixed strategy has the wrong length", base + ["policy"])
        policy = tuple(float(v) for v in raw)
    else:
        try:
            policy = _index(raw, game.pharma_actions, "action")
        except ValueError as exc:
            fail(f"population/policy: {exc}", base + ["policy"])
    events = []
    for i, ev in enumerate(pop.get("events", [])):
        where = base + ["events", i]
        if ev["type_index"] >= game.n_types:
            fail(f"population/events/{i}: type_index out of range", where + ["type_index"])
        response = None
        if "response" in ev:
            try:
                response = _index(ev["response"], game.physician_responses, "response")
            except ValueError as exc:
                fail(f"population/events/{i}: {exc}", where + ["response"])
        events.append(PayoffPatch.boost_type(game, float(ev["time"]), ev["event_id"],
                                             ev["type_index"], float(ev["amount"]), response))
    return PopulationBlock(tuple(float(v) for v in x0), float(pop["T"]), float(pop.get("dt", 0.05)),
                           policy, tuple(events))


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise ScenarioError("scenario not found", str(p))
    text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (column {exc.colno})", str(p), exc.lineno) from None
    if not isinstance(data, dict):
        raise ScenarioError("top-level value must be an object", str(p), 1)
    return scenario_from_dict(data, str(p), text)
