"""Reference games and scenarios.

The oncology launch game encodes the three-archetype payoff matrix in
reduced form: two responses, ``adopt`` carrying the matrix cell
``(u_P, u_D)`` and ``defer`` worth 0 to both sides, so every type's best
response is ``adopt``. The archetype vectors and the replicator shock
magnitudes are reconstructions; only the payoff cells, the prior and the
rationality are published values.
"""

from __future__ import annotations

import numpy as np

from .core import GameSpec, TypeSet, TypeVector
from .population import PayoffPatch

ONCOLOGY_ACTIONS = ("a1_clinical", "a2_kol", "a3_patient")
ONCOLOGY_RESPONSES = ("adopt", "defer")
ONCOLOGY_PRIOR = (0.35, 0.45, 0.20)

# (u_P, u_D) per (action, type)
ONCOLOGY_CELLS = (
    ((0.90, 0.85), (0.40, 0.30), (0.30, 0.25)),
    ((0.35, 0.40), (0.85, 0.90), (0.50, 0.45)),
    ((0.20, 0.30), (0.40, 0.50), (0.95, 0.90)),
)

# Worked-example likelihoods of "defer" after the KOL webinar.
DEFER_AFTER_KOL = (0.65, 0.20, 0.40)

ONCOLOGY_TYPES = TypeSet((
    TypeVector(0.60, 0.25, 0.10, 0.05, beta=2.0, gamma=0.3, delta=0.8, kappa=0.9),   # evidence
    TypeVector(0.15, 0.55, 0.20, 0.10, beta=1.0, gamma=0.5, delta=0.5, kappa=0.5),   # peer
    TypeVector(0.10, 0.20, 0.60, 0.10, beta=0.5, gamma=0.2, delta=0.6, kappa=1.5),   # patient
), separation=0.1)


def reduced_form_tensors(cells) -> tuple[np.ndarray, np.ndarray]:
    """``(u_P, u_D)`` of shape ``(M, 2, K)`` from an ``M x K`` grid of payoff pairs."""
    cells = np.asarray(cells, dtype=float)
    M, K, _ = cells.shape
    u_P = np.zeros((M, 2, K))
    u_D = np.zeros((M, 2, K))
    u_P[:, 0, :] = cells[:, :, 0]
    u_D[:, 0, :] = cells[:, :, 1]
    return u_P, u_D


def oncology_game(tau: float = 3.0, prior=ONCOLOGY_PRIOR) -> GameSpec:
    u_P, u_D = reduced_form_tensors(ONCOLOGY_CELLS)
    return GameSpec(
        type_set=ONCOLOGY_TYPES,
        pharma_actions=ONCOLOGY_ACTIONS,
        physician_responses=ONCOLOGY_RESPONSES,
        u_P=u_P,
        u_D=u_D,
        prior=prior,
        tau=tau,
        name="oncology-launch",
    )


# Population-shift scenario: evidence, peer and formulary-sensitive types.
MARKET_TYPES = TypeSet((
    TypeVector(0.60, 0.25, 0.10, 0.05, beta=2.0, gamma=0.3, delta=0.8, kappa=0.9),
    TypeVector(0.15, 0.55, 0.20, 0.10, beta=1.0, gamma=0.5, delta=0.5, kappa=0.5),
    TypeVector(0.10, 0.15, 0.15, 0.60, beta=1.0, gamma=0.4, delta=0.6, kappa=0.7),
), separation=0.1)
MARKET_SHARES = (0.35, 0.45, 0.20)
COMPETITOR_ENTRY_TIME = 100.0
COMPETITOR_BOOST = 0.014  # added to the formulary type's adopt utility


def market_game() -> GameSpec:
    # pre-entry fitness under the clinical action: evidence types gain slowly,
    # peer types lose slowly, formulary types roughly hold
    cells = (
        ((0.80, 0.5015), (0.40, 0.499), (0.30, 0.4995)),
        ((0.35, 0.45), (0.85, 0.52), (0.50, 0.44)),
        ((0.20, 0.40), (0.40, 0.45), (0.95, 0.55)),
    )
    u_P, u_D = reduced_form_tensors(cells)
    return GameSpec(
        type_set=MARKET_TYPES,
        pharma_actions=("a1_clinical", "a2_kol", "a3_access"),
        physician_responses=("adopt", "defer"),
        u_P=u_P,
        u_D=u_D,
        prior=MARKET_SHARES,
        tau=3.0,
        name="competitor-entry",
    )


def competitor_entry(game: GameSpec, time: float = COMPETITOR_ENTRY_TIME,
                     boost: float = COMPETITOR_BOOST) -> PayoffPatch:
    return PayoffPatch.boost_type(game, time, "competitor_entry", type_index=2, amount=boost, response=0)
