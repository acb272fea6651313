"""Game-theoretic, information-theoretic and evolutionary models of
pharma-physician engagement, with a seeded simulation harness."""

__version__ = "0.1.0"

from .belief import bayes_update, divergence, drift_detect, entropy, total_variation
from .core import GameSpec, TypeSet, TypeVector, sample_type_set, validate_belief
from .game import expected_pharma_utility, qre_distribution, solve_bne, solve_stackelberg
from .info import channel_capacity, information_gain, rate_distortion_curve
from .kernels import BACKEND
from .population import integrate_replicator, replicator_step
from .sim import ScenarioConfig, egpf_step, run_experiment

__all__ = [
    "BACKEND",
    "GameSpec",
    "ScenarioConfig",
    "TypeSet",
    "TypeVector",
    "bayes_update",
    "channel_capacity",
    "divergence",
    "drift_detect",
    "egpf_step",
    "entropy",
    "expected_pharma_utility",
    "information_gain",
    "integrate_replicator",
    "qre_distribution",
    "rate_distortion_curve",
    "replicator_step",
    "run_experiment",
    "sample_type_set",
    "solve_bne",
    "solve_stackelberg",
    "total_variation",
    "validate_belief",
]
