"""The engagement loop against synthetic logit-response physicians.

One step: pick an action (information-seeking mixture while the posterior
entropy is above ``tau_explore``, Stackelberg commitment otherwise), plan
content, observe a response, update the posterior, and run the drift check
over the trailing window. A drift alarm resets the posterior to the prior.

``egpf_step`` is the readable single-step path. ``run_experiment`` drives
whole episodes through the kernels in :mod:`egpf.kernels`, which follow
the same arithmetic.

Randomness: each replication owns a ``numpy.random.Generator(PCG64)``
spawned from ``SeedSequence(seed)``. It draws, in order, one uniform for
the hidden type (when not fixed), ``horizon`` uniforms for responses and
``horizon`` uniforms for the random baseline's actions. All policies in a
replication share these streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from . import kernels
from .belief import InteractionHistory, bayes_update, drift_detect, entropy
from .core import GameSpec, TypeSet, TypeVector, as_belief
from .game import leader_values, qre_channel, qre_distribution, solve_stackelberg
from .info import channel_capacity, information_gain, information_gains

POLICIES = {"egpf": kernels.POLICY_EGPF, "greedy": kernels.POLICY_GREEDY, "random": kernels.POLICY_RANDOM}

DEFAULT_TAU_EXPLORE = 1.0
DEFAULT_TAU_DRIFT = 0.15
DEFAULT_WINDOW = 30
CONFIDENCE_LEVEL = 0.9

REQUIRED_COMPLIANCE = ("fair-balance", "indication-specific")


@dataclass(frozen=True)
class LikelihoodOverride:
    """Replace P(response | action, theta_k) for every k; the other responses
    share the remaining mass in proportion to their logit probabilities."""

    action: int
    response: int
    values: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    game: GameSpec
    true_type_index: int | None = None
    horizon: int = 200
    tau_explore: float = DEFAULT_TAU_EXPLORE
    tau_drift: float = DEFAULT_TAU_DRIFT
    window: int = DEFAULT_WINDOW
    drift_alpha: float = 1.0
    drift_smoothing: float | None = None
    epsilon_scale: float = 1.0
    seed: int = 0
    replications: int = 1
    forced_responses: tuple[int, ...] = ()
    likelihood_overrides: tuple[LikelihoodOverride, ...] = ()
    name: str = ""

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.tau_drift < 0 or self.window < 0:
            raise ValueError("tau_drift and window must be >= 0")
        if self.true_type_index is not None and not 0 <= self.true_type_index < self.game.n_types:
            raise ValueError("true_type_index out of range")
        L = len(self.game.physician_responses)
        if any(not 0 <= d < L for d in self.forced_responses):
            raise ValueError("forced response out of range")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=int(seed))


def observation_channel(config: ScenarioConfig) -> np.ndarray:
    """Logit likelihood tensor ``(M, L, K)`` with the scenario's overrides applied."""
    P = qre_channel(config.game).copy()
    for ov in config.likelihood_overrides:
        vals = np.asarray(ov.values, float)
        if vals.shape != (config.game.n_types,) or np.any(vals < 0) or np.any(vals > 1):
            raise ValueError("override values must be K probabilities")
        col = P[ov.action]
        others = [d for d in range(col.shape[0]) if d != ov.response]
        rest = col[others].sum(axis=0)
        col[others] = col[others] / rest * (1.0 - vals)
        col[ov.response] = vals
    return P


@dataclass(frozen=True)
class EngagementModel:
    """Quantities precomputed once per scenario."""

    channel: np.ndarray
    values: np.ndarray
    optimal_value: np.ndarray
    capacities: np.ndarray

    @classmethod
    def build(cls, config: ScenarioConfig) -> "EngagementModel":
        P = observation_channel(config)
        V = leader_values(config.game)
        caps = np.array([channel_capacity(P[:, :, k]).capacity for k in range(P.shape[2])])
        return cls(np.ascontiguousarray(P), np.ascontiguousarray(V), V.max(axis=0), caps)


def epsilon_schedule(t: int, K: int, scale: float = 1.0) -> float:
    """``min(1, scale * sqrt(K ln(t + 1) / t))``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return min(1.0, scale * math.sqrt(K * math.log(t + 1.0) / t))


def simulate_response(game: GameSpec, action: int, true_type: int, rng: np.random.Generator,
                      channel: np.ndarray | None = None) -> int:
    """Draw a response from the logit model by inverting its CDF at one uniform."""
    probs = qre_distribution(game, action, true_type) if channel is None else channel[action, :, true_type]
    return _inverse_cdf(probs, rng.random())


def _inverse_cdf(probs, u: float) -> int:
    c = 0.0
    for j, p in enumerate(probs):
        c += p
        if u < c:
            return j
    return len(probs) - 1


@dataclass(frozen=True)
class ContentPlan:
    action: int
    evidence_density: str
    length_words: int
    tone: str
    compliance_flags: tuple[str, ...]
    hedging: bool

    def __post_init__(self):
        if self.length_words <= 0:
            raise ValueError("length_words must be > 0")


_TONES = ("formal, data-centric", "collegial, peer-referenced", "patient-centred", "practical, access-focused")


def posterior_mean_type(mu, type_set: TypeSet) -> TypeVector:
    return TypeVector.from_array(as_belief(mu, len(type_set)) @ type_set.matrix())


def content_plan(action: int, mu, capacity_bits: float, type_set: TypeSet) -> ContentPlan:
    """Deterministic content brief for the chosen action.

    Evidence density comes from where the posterior-mean alpha_E falls in
    the type set's alpha_E range (thirds); length is
    ``round(200 + 1000 min(capacity, 1))`` words; hedging when H(mu) > 1 bit.
    """
    if capacity_bits < 0:
        raise ValueError("capacity_bits must be >= 0")
    mean = posterior_mean_type(mu, type_set)
    a_e = np.array([t.alpha_E for t in type_set])
    span = a_e.max() - a_e.min()
    pos = 0.5 if span == 0 else (mean.alpha_E - a_e.min()) / span
    density = "low" if pos < 1 / 3 else ("med" if pos < 2 / 3 else "high")
    hedging = entropy(mu) > 1.0
    flags = REQUIRED_COMPLIANCE + (("hedged-claims",) if hedging else ())
    return ContentPlan(
        action=int(action),
        evidence_density=density,
        length_words=int(round(200 + 1000 * min(capacity_bits, 1.0))),
        tone=_TONES[int(np.argmax(mean.alphas))],
        compliance_flags=flags,
        hedging=hedging,
    )


def compliance_filter(plan: ContentPlan) -> bool:
    return all(f in plan.compliance_flags for f in REQUIRED_COMPLIANCE)


_DENSITY_LEVEL = {"low": 1 / 6, "med": 0.5, "high": 5 / 6}

Scorer = Callable[[ContentPlan, TypeVector, int], float]

DEFAULT_SCORERS: dict[str, Scorer] = {
    # closeness of the evidence density to the type's evidence appetite
    "relevance": lambda plan, theta, eq: 1.0 - abs(_DENSITY_LEVEL[plan.evidence_density] - theta.alpha_E),
    "accuracy": lambda plan, theta, eq: 1.0 if "fair-balance" in plan.compliance_flags else 0.0,
    "compliance": lambda plan, theta, eq: 1.0 if compliance_filter(plan) else 0.0,
    # overclaiming: dense evidence pushed without hedging to a low-evidence type
    "bias": lambda plan, theta, eq: float(
        plan.evidence_density == "high" and not plan.hedging and theta.alpha_E < 0.2
    ),
    "alignment": lambda plan, theta, eq: 1.0 if plan.action == eq else 0.0,
}


def reward_score(
    plan: ContentPlan,
    theta: TypeVector,
    equilibrium_action: int,
    weights: Sequence[float] = (1.0, 1.0, 1.0, 1.0, 1.0),
    scorers: dict[str, Scorer] | None = None,
) -> float:
    """``w1 rel + w2 acc + w3 comp - w4 bias + w5 align``."""
    s = dict(DEFAULT_SCORERS)
    if scorers:
        s.update(scorers)
    w1, w2, w3, w4, w5 = (float(w) for w in weights)
    parts = {name: fn(plan, theta, equilibrium_action) for name, fn in s.items()}
    return (
        w1 * parts["relevance"] + w2 * parts["accuracy"] + w3 * parts["compliance"]
        - w4 * parts["bias"] + w5 * parts["alignment"]
    )


@dataclass(frozen=True)
class LoopState:
    t: int
    mu: np.ndarray
    prior: np.ndarray
    true_type: int
    history: InteractionHistory = field(default_factory=InteractionHistory)
    window_start: int = 0
    response_u: np.ndarray | None = None
    action_u: np.ndarray | None = None
    recalibrations: tuple[int, ...] = ()


@dataclass(frozen=True)
class StepRecord:
    t: int
    action: int
    response: int
    entropy_before: float
    explored: bool
    epsilon: float
    posterior: np.ndarray
    plan: ContentPlan
    drift_statistic: float | None
    recalibrated: bool
    regret: float
    kl_to_truth: float


def replication_streams(seed: int, replications: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(replications)]


def draw_replication(config: ScenarioConfig, rng: np.random.Generator) -> tuple[int, np.ndarray, np.ndarray]:
    if config.true_type_index is None:
        k = _inverse_cdf(config.game.prior, rng.random())
    else:
        k = config.true_type_index
    return k, rng.random(config.horizon), rng.random(config.horizon)


def init_state(config: ScenarioConfig, replication: int = 0) -> LoopState:
    rng = replication_streams(config.seed, replication + 1)[replication]
    k, ru, au = draw_replication(config, rng)
    prior = np.array(config.game.prior)
    return LoopState(t=0, mu=prior, prior=prior, true_type=k, response_u=ru, action_u=au)


def egpf_step(
    state: LoopState,
    config: ScenarioConfig,
    model: EngagementModel | None = None,
) -> tuple[LoopState, StepRecord]:
    model = model or EngagementModel.build(config)
    game = config.game
    K = game.n_types
    t = state.t + 1
    mu = state.mu

    H = entropy(mu)
    explored = H > config.tau_explore
    eps = 0.0
    eu = model.values @ mu
    if explored:
        eps = epsilon_schedule(t, K, config.epsilon_scale)
        scores = (1.0 - eps) * eu + eps * information_gains(mu, model.channel)
        # equal scores fall back to the higher expected payoff, then the lower index
        action = int(np.lexsort((-np.arange(len(eu)), eu, scores))[-1])
    else:
        action = solve_stackelberg(game, mu)[0]

    k_hat = int(np.argmax(mu))
    plan = content_plan(action, mu, float(model.capacities[k_hat]), game.type_set)
    if not compliance_filter(plan):
        raise RuntimeError("content plan failed the compliance filter")

    if t <= len(config.forced_responses):
        response = config.forced_responses[t - 1]
    else:
        response = _inverse_cdf(model.channel[action, :, state.true_type], float(state.response_u[t - 1]))

    posterior = bayes_update(mu, model.channel[action, response])
    history = state.history.append(action, response, t)

    drift_stat = None
    recalibrated = False
    window_start = state.window_start
    recal = state.recalibrations
    if config.window > 0 and t - window_start >= config.window:
        report = drift_detect(history, model.channel, posterior, config.window,
                              config.tau_drift, config.drift_alpha, config.drift_smoothing)
        drift_stat = report.statistic
        if report.triggered:
            posterior = state.prior.copy()
            recalibrated = True
            window_start = t
            recal = recal + (t,)

    k_star = state.true_type
    regret = float(model.optimal_value[k_star] - model.values[action, k_star])
    kl = -math.log2(posterior[k_star]) if posterior[k_star] > 0 else math.inf
    record = StepRecord(t, action, response, H, explored, eps, posterior, plan,
                        drift_stat, recalibrated, regret, kl)
    new_state = replace(state, t=t, mu=posterior, history=history,
                        window_start=window_start, recalibrations=recal)
    return new_state, record


@dataclass
class EpisodeRun:
    policy: str
    true_type: int
    actions: np.ndarray
    responses: np.ndarray
    entropies: np.ndarray
    beliefs: np.ndarray
    explored: np.ndarray
    drift_stat: np.ndarray
    triggered: np.ndarray
    regret: np.ndarray

    @property
    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.regret)

    @property
    def kl_to_truth(self) -> np.ndarray:
        """``-log2 mu_t(theta*)`` for t = 0..T."""
        with np.errstate(divide="ignore"):
            return -np.log2(self.beliefs[:, self.true_type])

    def steps_to_confidence(self, level: float = CONFIDENCE_LEVEL) -> int | None:
        """First t >= 1 where the posterior puts at least ``level`` on the true
        type (a tie for the top weight does not count)."""
        b = self.beliefs[1:]
        top = b.max(axis=1)
        unique_top = (b == top[:, None]).sum(axis=1) == 1
        hit = (top >= level) & unique_top & (b.argmax(axis=1) == self.true_type)
        idx = np.flatnonzero(hit)
        return int(idx[0]) + 1 if idx.size else None


def run_episode(config: ScenarioConfig, model: EngagementModel, true_type: int,
                response_u: np.ndarray, action_u: np.ndarray, policy: str = "egpf") -> EpisodeRun:
    T = config.horizon
    forced = np.full(T, -1, dtype=np.int64)
    n = min(T, len(config.forced_responses))
    forced[:n] = config.forced_responses[:n]
    smoothing = 0.0 if config.drift_smoothing is None else float(config.drift_smoothing)
    out = kernels.run_episode(
        model.values, model.channel, np.ascontiguousarray(config.game.prior, dtype=float),
        int(true_type), T, float(config.tau_explore), float(config.tau_drift), int(config.window),
        float(config.drift_alpha), smoothing, float(config.epsilon_scale), POLICIES[policy],
        np.ascontiguousarray(response_u, dtype=float), np.ascontiguousarray(action_u, dtype=float), forced,
    )
    actions, responses, entropies, beliefs, explored, drift_stat, triggered = out
    regret = model.optimal_value[true_type] - model.values[actions, true_type]
    return EpisodeRun(policy, int(true_type), actions, responses, entropies, beliefs,
                      explored.astype(bool), drift_stat, triggered.astype(bool), regret)


@dataclass
class PolicySummary:
    policy: str
    replications: int
    mean_cumulative_regret: np.ndarray
    se_cumulative_regret: np.ndarray
    mean_kl_to_truth: np.ndarray
    se_kl_to_truth: np.ndarray
    kl_increment_se: np.ndarray
    steps_to_confidence: dict[int, float]
    unconverged: dict[int, int]
    exploration_steps: float
    exploration_regret: float
    exploitation_regret: float
    drift_triggers: float

    def to_dict(self, game: GameSpec) -> dict[str, Any]:
        T = len(self.mean_cumulative_regret)
        final = float(self.mean_cumulative_regret[-1])
        half = 1.96 * float(self.se_cumulative_regret[-1])
        return {
            "policy": self.policy,
            "replications": self.replications,
            "horizon": T,
            "cumulative_regret": {"mean": final, "ci95": [final - half, final + half]},
            "final_kl_to_truth_bits": float(self.mean_kl_to_truth[-1]),
            "steps_to_90pct": {str(k): v for k, v in sorted(self.steps_to_confidence.items())},
            "unconverged_runs": {str(k): v for k, v in sorted(self.unconverged.items())},
            "phases": {
                "exploration_steps": self.exploration_steps,
                "exploration_regret": self.exploration_regret,
                "exploitation_regret": self.exploitation_regret,
            },
            "drift_triggers": self.drift_triggers,
        }


def summarize(runs: Sequence[EpisodeRun], horizon: int) -> PolicySummary:
    R = len(runs)
    cum = np.array([r.cumulative_regret for r in runs])
    kl = np.array([r.kl_to_truth for r in runs])
    ddof = 1 if R > 1 else 0
    se = lambda a: a.std(axis=0, ddof=ddof) / math.sqrt(R)  # noqa: E731
    steps: dict[int, list[int]] = {}
    unconverged: dict[int, int] = {}
    for r in runs:
        s = r.steps_to_confidence()
        steps.setdefault(r.true_type, []).append(horizon + 1 if s is None else s)
        unconverged[r.true_type] = unconverged.get(r.true_type, 0) + (s is None)
    explore_regret = np.array([r.regret[r.explored].sum() for r in runs])
    exploit_regret = np.array([r.regret[~r.explored].sum() for r in runs])
    return PolicySummary(
        policy=runs[0].policy,
        replications=R,
        mean_cumulative_regret=cum.mean(axis=0),
        se_cumulative_regret=se(cum),
        mean_kl_to_truth=kl.mean(axis=0),
        se_kl_to_truth=se(kl),
        kl_increment_se=se(np.diff(kl, axis=1)),
        steps_to_confidence={k: float(np.mean(v)) for k, v in steps.items()},
        unconverged=unconverged,
        exploration_steps=float(np.mean([r.explored.sum() for r in runs])),
        exploration_regret=float(explore_regret.mean()),
        exploitation_regret=float(exploit_regret.mean()),
        drift_triggers=float(np.mean([r.triggered.sum() for r in runs])),
    )


@dataclass
class ExperimentResult:
    config: ScenarioConfig
    model: EngagementModel
    summaries: dict[str, PolicySummary]
    runs: dict[str, list[EpisodeRun]]


def run_experiment(
    config: ScenarioConfig,
    replications: int | None = None,
    policies: Sequence[str] = ("egpf", "random", "greedy"),
    keep_runs: bool = True,
) -> ExperimentResult:
    """Run every policy on the same replication streams, in replication order."""
    R = config.replications if replications is None else int(replications)
    model = EngagementModel.build(config)
    runs: dict[str, list[EpisodeRun]] = {p: [] for p in policies}
    for rng in replication_streams(config.seed, R):
        k, ru, au = draw_replication(config, rng)
        for p in policies:
            runs[p].append(run_episode(config, model, k, ru, au, p))
    summaries = {p: summarize(runs[p], config.horizon) for p in policies}
    return ExperimentResult(config, model, summaries, runs if keep_runs else {})


def mean_log_gain(config: ScenarioConfig, replications: int, seed: int | None = None) -> tuple[float, float, float]:
    """Monte Carlo check of the per-step posterior log-gain at the first step.

    The hidden type is drawn from the prior, so the expected gain
    ``E log2(mu_1(theta*) / mu_0(theta*))`` equals the information gain of the
    first action. Returns ``(mean gain, standard error, predicted gain)``.
    """
    cfg = replace(config, true_type_index=None, horizon=1, forced_responses=(),
                  seed=config.seed if seed is None else seed)
    model = EngagementModel.build(cfg)
    prior = np.asarray(cfg.game.prior)
    gains = np.empty(replications)
    first_action = 0
    for i, rng in enumerate(replication_streams(cfg.seed, replications)):
        k, ru, au = draw_replication(cfg, rng)
        run = run_episode(cfg, model, k, ru, au, "egpf")
        first_action = int(run.actions[0])
        gains[i] = math.log2(run.beliefs[1, k] / prior[k])
    predicted = information_gain(prior, first_action, model.channel)
    return float(gains.mean()), float(gains.std(ddof=1) / math.sqrt(replications)), predicted
