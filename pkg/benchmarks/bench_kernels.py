"""Time the compiled and pure-Python kernels on the same workloads.

    python3 benchmarks/bench_kernels.py [--replications 200] [--horizon 200]
"""

import argparse
import time

import numpy as np

from egpf.kernels import available_backends
from egpf.scenarios import oncology_game
from egpf.sim import POLICIES, EngagementModel, ScenarioConfig, draw_replication, replication_streams


def episodes(backend, config, model, streams, policy):
    prior = np.ascontiguousarray(config.game.prior, float)
    forced = np.full(config.horizon, -1, dtype=np.int64)
    for k, ru, au in streams:
        backend.run_episode(model.values, model.channel, prior, k, config.horizon, config.tau_explore,
                            config.tau_drift, config.window, config.drift_alpha, 0.0, config.epsilon_scale,
                            POLICIES[policy], ru, au, forced)


def replicator(backend, steps):
    fit = np.random.default_rng(0).normal(size=(steps, 3))
    backend.euler_replicator(np.array([0.2, 0.3, 0.5]), fit, 0.01)


def best_of(fn, repeat=3):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--replications", type=int, default=200)
    parser.add_argument("--horizon", type=int, default=200)
    parser.add_argument("--replicator-steps", type=int, default=200_000)
    args = parser.parse_args()

    config = ScenarioConfig(game=oncology_game(), horizon=args.horizon, seed=1)
    model = EngagementModel.build(config)
    streams = [draw_replication(config, rng) for rng in replication_streams(config.seed, args.replications)]
    backends = available_backends()

    rows = []
    for policy in ("egpf", "greedy", "random"):
        rows.append((f"episode/{policy}", {name: best_of(lambda b=b: episodes(b, config, model, streams, policy))
                                          for name, b in backends.items()}))
    rows.append(("replicator", {name: best_of(lambda b=b: replicator(b, args.replicator_steps))
                                for name, b in backends.items()}))

    print(f"{args.replications} episodes x {args.horizon} steps; replicator {args.replicator_steps} steps")
    print(f"{'workload':<18}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, t in rows:
        py = t["python"]
        cy = t.get("cython")
        speed = f"{py / cy:9.1f}x" if cy else "      n/a"
        cy_txt = f"{cy:12.4f}" if cy else f"{'n/a':>12}"
        print(f"{name:<18}{py:12.4f}{cy_txt}{speed}")


if __name__ == "__main__":
    main()
