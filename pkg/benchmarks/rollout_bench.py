#!/usr/bin/env python3
"""Throughput benchmark: compiled rollout kernel vs the numpy fallback.

Measures environment steps per second for the batched MountainCar rollout
at a few batch sizes, plus one end-to-end optimizer run per backend.
"""

import time

import numpy as np

from distpg import GaussianMlpPolicy, MountainCarEnv, build_topology, metropolis_weights
from distpg import _backend
from distpg.optimizer import AlgoConfig, run
from distpg.trajectories import sample_trajectories

N_AGENTS = 3
HORIZON = 100


def bench_rollout(backend: str, count: int, repeats: int = 5) -> float:
    env = MountainCarEnv(N_AGENTS)
    policy = GaussianMlpPolicy(N_AGENTS, env.state_dim, hidden=64, sigma=0.5)
    rng = np.random.default_rng(0)
    params = policy.init_params(rng)
    sample_trajectories(env, policy, params, count, HORIZON, rng, backend=backend)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        sample_trajectories(env, policy, params, count, HORIZON, rng, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return count * HORIZON / best


def bench_run(backend: str) -> float:
    mixing = metropolis_weights(build_topology("star", N_AGENTS))
    env = MountainCarEnv(N_AGENTS)
    policy = GaussianMlpPolicy(N_AGENTS, env.state_dim, hidden=64, sigma=0.5)
    cfg = AlgoConfig(epochs=5, epoch_len=2, batch=10, minibatch=5, alpha=0.0025,
                     gamma=0.999, horizon=HORIZON, adam=True, eval_rollouts=10,
                     backend=backend)
    t0 = time.perf_counter()
    run(cfg, mixing, env, policy, seed=0)
    return time.perf_counter() - t0


def main():
    backends = ["python"]
    if _backend.compiled_available():
        backends.append("compiled")
    else:
        print("compiled extension not built; benchmarking the fallback only")

    print(f"{'batch':>8}  " + "  ".join(f"{b:>16}" for b in backends))
    for count in (1, 10, 100):
        rates = [bench_rollout(b, count) for b in backends]
        cells = "  ".join(f"{r:>11.0f} st/s" for r in rates)
        print(f"{count:>8}  {cells}")

    print()
    for b in backends:
        print(f"end-to-end optimizer run ({b}): {bench_run(b):.2f} s")


if __name__ == "__main__":
    main()
