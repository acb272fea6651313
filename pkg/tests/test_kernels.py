import os
import subprocess
import sys

import numpy as np
import pytest

from egpf import kernels
from egpf.sim import (
    POLICIES,
    EngagementModel,
    ScenarioConfig,
    draw_replication,
    egpf_step,
    init_state,
    replication_streams,
    run_episode,
)

from conftest import random_game

BACKENDS = kernels.available_backends()
needs_cython = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def episode_args(config, seed):
    model = EngagementModel.build(config)
    k, ru, au = draw_replication(config, replication_streams(seed, 1)[0])
    forced = np.full(config.horizon, -1, dtype=np.int64)
    return model, k, ru, au, forced


def call(backend, config, model, k, ru, au, forced, policy):
    return backend.run_episode(
        model.values, model.channel, np.ascontiguousarray(config.game.prior, float), k, config.horizon,
        config.tau_explore, config.tau_drift, config.window, config.drift_alpha, 0.0,
        config.epsilon_scale, POLICIES[policy], ru, au, forced,
    )


@needs_cython
@pytest.mark.parametrize("policy", sorted(POLICIES))
@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_backends_bit_identical(onc, policy, seed):
    cfg = ScenarioConfig(game=onc, horizon=150, window=20, tau_drift=0.1)
    model, k, ru, au, forced = episode_args(cfg, seed)
    a = call(BACKENDS["python"], cfg, model, k, ru, au, forced, policy)
    b = call(BACKENDS["cython"], cfg, model, k, ru, au, forced, policy)
    for x, y in zip(a, b):
        assert np.array_equal(x, y, equal_nan=True)


@needs_cython
@pytest.mark.parametrize("seed", range(5))
def test_backends_identical_on_random_games(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng, 4, 3, 3)
    cfg = ScenarioConfig(game=g, horizon=80, window=15, drift_alpha=2.0)
    model, k, ru, au, forced = episode_args(cfg, seed)
    a = call(BACKENDS["python"], cfg, model, k, ru, au, forced, "egpf")
    b = call(BACKENDS["cython"], cfg, model, k, ru, au, forced, "egpf")
    for x, y in zip(a, b):
        assert np.array_equal(x, y, equal_nan=True)


@needs_cython
def test_replicator_backends_identical():
    rng = np.random.default_rng(0)
    fit = rng.normal(size=(400, 3))
    x0 = np.array([0.2, 0.3, 0.5])
    assert np.array_equal(BACKENDS["python"].euler_replicator(x0, fit, 0.05),
                          BACKENDS["cython"].euler_replicator(x0, fit, 0.05))


@pytest.mark.parametrize("replication", range(6))
def test_step_function_matches_episode_kernel(onc, replication):
    cfg = ScenarioConfig(game=onc, horizon=200, seed=11)
    model = EngagementModel.build(cfg)
    state = init_state(cfg, replication)
    run = run_episode(cfg, model, state.true_type, state.response_u, state.action_u, "egpf")
    for t in range(cfg.horizon):
        state, rec = egpf_step(state, cfg, model)
        assert rec.action == run.actions[t]
        assert rec.response == run.responses[t]
        assert rec.recalibrated == run.triggered[t]
        assert np.allclose(rec.posterior, run.beliefs[t + 1], rtol=0, atol=1e-12)


def test_pure_python_switch():
    code = "import egpf.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, EGPF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    if "cython" in BACKENDS:
        env["EGPF_PURE_PYTHON"] = "0"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "cython"
