"""Golden checks: published worked-example values replayed as assertions."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .belief import InteractionHistory, bayes_update, drift_detect
from .compose import ScalePoset, sheaf_loss
from .core import GameSpec, validate_belief
from .game import best_response, expected_pharma_utility, solve_bne, solve_stackelberg
from .population import fitness, integrate_replicator
from .scenarios import (
    DEFER_AFTER_KOL,
    ONCOLOGY_PRIOR,
    competitor_entry,
    market_game,
    oncology_game,
)
from .sim import (
    DEFAULT_TAU_DRIFT,
    DEFAULT_WINDOW,
    EngagementModel,
    LikelihoodOverride,
    ScenarioConfig,
    egpf_step,
    epsilon_schedule,
    init_state,
    run_experiment,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: str
    expected: str
    tolerance: str
    passed: bool
    check_id: str = ""


@dataclass(frozen=True)
class GoldenCheck:
    name: str
    run: Callable[[GameSpec], CheckResult]


def _fmt(x) -> str:
    if isinstance(x, (tuple, list, np.ndarray)):
        return "(" + ", ".join(_fmt(v) for v in x) + ")"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.4f}"
    return str(x)


def _close(name, measured, expected, tol) -> CheckResult:
    m = np.atleast_1d(np.asarray(measured, float))
    e = np.atleast_1d(np.asarray(expected, float))
    ok = m.shape == e.shape and bool(np.all(np.abs(m - e) <= tol))
    return CheckResult(name, _fmt(measured), _fmt(expected), f"±{tol:g}", ok)


def _equal(name, measured, expected) -> CheckResult:
    return CheckResult(name, _fmt(measured), _fmt(expected), "exact", measured == expected)


# worked-example posterior after "defer" on the KOL webinar, to 4 places;
# the published rounding (0.572, 0.227, 0.201) misrounds the middle entry
EXAMPLE_POSTERIOR = (0.5723, 0.2264, 0.2013)
PUBLISHED_POSTERIOR = (0.572, 0.227, 0.201)

# interaction-level and weekly-level beliefs for the multi-scale consistency check
SHEAF_BELIEFS = {"interaction": (0.72, 0.18, 0.10), "weekly": (0.86, 0.11, 0.03)}


def _utility(action: int, expected: float):
    def run(game):
        return _close(f"expected utility a{action + 1} under prior", expected_pharma_utility(game, action, ONCOLOGY_PRIOR), expected, 1e-9)
    return run


def _prior_valid(game):
    return _equal("prior (0.35, 0.45, 0.20) is a valid belief", bool(validate_belief(ONCOLOGY_PRIOR)), True)


def _type_optimal_cell(game):
    d = best_response(game, 0, 0)
    return _close("best-response cell (a1, evidence type) u_D", game.u_D[0, d, 0], 0.85, 1e-12)


def _point_mass(game):
    return _close("point mass on patient type, a3", expected_pharma_utility(game, 2, (0, 0, 1)), 0.95, 1e-12)


def _initial_commitment(game):
    a, v = solve_stackelberg(game, ONCOLOGY_PRIOR)
    return _close("initial commitment (action, payoff)", (a + 1, v), (2, 0.605), 1e-9)


def _posterior(game):
    return _close("posterior after defer", bayes_update(ONCOLOGY_PRIOR, DEFER_AFTER_KOL), EXAMPLE_POSTERIOR, 5e-4)


def _posterior_lead(game):
    mu = bayes_update(ONCOLOGY_PRIOR, DEFER_AFTER_KOL)
    return _close("posterior weight on evidence type", mu[0], 0.572, 5e-4)


def _switch(game):
    a, v = solve_stackelberg(game, PUBLISHED_POSTERIOR)
    return _close("commitment after update (action, payoff)", (a + 1, v), (1, 0.666), 5e-4)


def _replay(game):
    cfg = example_replay_config(game)
    model = EngagementModel.build(cfg)
    state = init_state(cfg)
    state, r1 = egpf_step(state, cfg, model)
    state, r2 = egpf_step(state, cfg, model)
    seq = "->".join(game.pharma_actions[r.action].split("_")[0] for r in (r1, r2))
    ok = seq == "a2->a1" and bool(np.all(np.abs(r1.posterior - EXAMPLE_POSTERIOR) <= 5e-4))
    return CheckResult("loop replay: actions, posterior after step 1",
                       f"{seq} {_fmt(r1.posterior)}", f"a2->a1 {_fmt(EXAMPLE_POSTERIOR)}", "±5e-4", ok)


def _defaults(game):
    cfg = ScenarioConfig(game=oncology_game())
    measured = (cfg.game.tau, cfg.window, cfg.tau_drift)
    return _equal("default rationality, window, drift threshold", measured, (3.0, 30, 0.15))


def _drift_null(game):
    g = oncology_game()
    model = EngagementModel.build(ScenarioConfig(game=g))
    rng = np.random.default_rng(0)
    mu = np.array(g.prior)
    pairs = []
    for _ in range(DEFAULT_WINDOW):
        a = int(rng.integers(len(g.pharma_actions)))
        pred = model.channel[a] @ mu
        pairs.append((a, int(rng.choice(len(pred), p=pred))))
    hist = InteractionHistory.from_pairs(pairs)
    # the responses come from the prior-mixture predictive, so the detector sees no drift
    rep = drift_detect(hist, model.channel, mu, DEFAULT_WINDOW, DEFAULT_TAU_DRIFT)
    return CheckResult("drift statistic on in-model samples", _fmt(rep.statistic), "< 0.15", "threshold",
                       not rep.triggered)


def _sheaf(game):
    poset = ScalePoset(scales=tuple(SHEAF_BELIEFS), K=3)
    loss = sheaf_loss(SHEAF_BELIEFS, poset)
    return CheckResult("multi-scale consistency loss", _fmt(loss), "< 0.05 (reported 0.02)", "bound", loss < 0.05)


def _fitness(game):
    return _close("type fitness under a1", fitness(ONCOLOGY_PRIOR, game, 0)[0], (0.85, 0.30, 0.25), 1e-12)


def _competitor(game):
    mg = market_game()
    traj = integrate_replicator(mg.prior, mg, 0, 200.0, 0.05, [competitor_entry(mg)])
    after = traj.states[traj.times >= 100.0 - 1e-12]
    rising = bool(np.all(np.diff(after[:, 2]) > 0))
    end = traj.states[-1]
    overtakes = bool(end[2] > end[0] and end[2] > end[1])
    return CheckResult("competitor entry: x3 rises and overtakes", _fmt(end), "x3 increasing, x3 = max",
                       "direction", rising and overtakes)


def _epsilon(game):
    return _close("exploration rate t=1 (K=3, K=1)", (epsilon_schedule(1, 3), epsilon_schedule(1, 1)),
                  (1.0, math.sqrt(math.log(2.0))), 1e-12)


def _convergence_order(game):
    cfg = ScenarioConfig(game=oncology_game(), horizon=200, replications=500, seed=2026)
    res = run_experiment(cfg, policies=("egpf", "random"), keep_runs=False)
    e = res.summaries["egpf"].steps_to_confidence
    r = res.summaries["random"].steps_to_confidence
    ks = sorted(e)
    ok = all(e[k] < r[k] for k in ks)
    return CheckResult("steps to 90% (loop vs random)", _fmt([e[k] for k in ks]),
                       f"< {_fmt([r[k] for k in ks])}", "ordering", ok)


def _commitment_dominance(game):
    rng = np.random.default_rng(41)
    base = oncology_game()
    violations = 0
    for _ in range(100):
        u_P = rng.normal(size=base.shape)
        u_D = rng.normal(size=base.shape)
        g = base.replace(u_P=u_P, u_D=u_D, prior=rng.dirichlet(np.ones(3)))
        lead = solve_stackelberg(g)[1]
        bne = solve_bne(g).leader_payoff(g, g.prior)
        violations += lead < bne
    return _equal("commitment >= simultaneous payoff (violations)", violations, 0)


def example_replay_config(game: GameSpec | None = None) -> ScenarioConfig:
    g = game or oncology_game()
    return ScenarioConfig(
        game=g,
        true_type_index=0,
        horizon=2,
        tau_explore=1.6,
        forced_responses=(g.response_index("defer"), g.response_index("adopt")),
        likelihood_overrides=(LikelihoodOverride(g.action_index("a2_kol"), g.response_index("defer"), DEFER_AFTER_KOL),),
        name="example_3_1",
    )


CHECKS: tuple[GoldenCheck, ...] = (
    GoldenCheck("prior-valid", _prior_valid),
    GoldenCheck("type-optimal-cell", _type_optimal_cell),
    GoldenCheck("utility-a1", _utility(0, 0.555)),
    GoldenCheck("utility-a2", _utility(1, 0.605)),
    GoldenCheck("utility-a3", _utility(2, 0.440)),
    GoldenCheck("point-mass-utility", _point_mass),
    GoldenCheck("initial-commitment", _initial_commitment),
    GoldenCheck("posterior", _posterior),
    GoldenCheck("posterior-lead", _posterior_lead),
    GoldenCheck("commitment-switch", _switch),
    GoldenCheck("loop-replay", _replay),
    GoldenCheck("defaults", _defaults),
    GoldenCheck("drift-null", _drift_null),
    GoldenCheck("sheaf-consistency", _sheaf),
    GoldenCheck("fitness-a1", _fitness),
    GoldenCheck("competitor-entry", _competitor),
    GoldenCheck("epsilon-schedule", _epsilon),
    GoldenCheck("commitment-dominance", _commitment_dominance),
    GoldenCheck("convergence-order", _convergence_order),
)


def run_checks(game: GameSpec | None = None) -> list[CheckResult]:
    g = game or oncology_game()
    out = []
    for check in CHECKS:
        try:
            out.append(replace(check.run(g), check_id=check.name))
        except Exception as exc:  # a crashing check is a failing check
            out.append(CheckResult(check.name, f"error: {exc}", "-", "-", False, check.name))
    return out


def format_table(results: list[CheckResult]) -> str:
    headers = ("id", "check", "measured", "expected", "tol", "status")
    rows = [(r.check_id, r.name, r.measured, r.expected, r.tolerance, "PASS" if r.passed else "FAIL") for r in results]
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    return "\n".join([line(headers), line(tuple("-" * w for w in widths))] + [line(r) for r in rows])
