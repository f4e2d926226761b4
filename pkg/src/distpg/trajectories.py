"""Trajectory containers and batched samplers.

Sampling pre-draws every random number in a fixed documented order, then
hands the deterministic rollout to the active kernel backend:

* MountainCar: initial positions (count, n) uniform draws, then step
  noise (count, horizon, n) standard normals.
* Tabular: initial-state uniforms (count,), then per-step action uniforms
  (count, horizon, n), then transition uniforms (count, horizon).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend, _py_kernels
from .envs import MC_RESET_HIGH, MC_RESET_LOW, MountainCarEnv, TabularMDP
from .policies import GaussianMlpPolicy, TabularSoftmaxPolicy


@dataclass
class Trajectory:
    """One episode: horizon+1 states, horizon joint actions, per-agent rewards."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    @property
    def n_agents(self) -> int:
        return self.rewards.shape[1]


@dataclass
class TrajectoryBatch:
    """Stacked episodes; leading axis indexes trajectories."""

    states: np.ndarray   # (N, H+1, state_dim) floats or (N, H+1) ints
    actions: np.ndarray  # (N, H, n)
    rewards: np.ndarray  # (N, H, n)

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, idx: int) -> Trajectory:
        return Trajectory(self.states[idx], self.actions[idx], self.rewards[idx])

    @property
    def horizon(self) -> int:
        return self.actions.shape[1]

    @property
    def n_agents(self) -> int:
        return self.rewards.shape[2]

    def flat_steps(self):
        """(states, actions) flattened over trajectories and steps."""
        n = len(self)
        h = self.horizon
        if self.states.ndim == 3:
            states = self.states[:, :h, :].reshape(n * h, -1)
        else:
            states = self.states[:, :h].reshape(n * h)
        actions = self.actions.reshape(n * h, self.n_agents)
        return states, actions


def _stack_mlp_params(policy: GaussianMlpPolicy, params: np.ndarray):
    n = policy.n_agents
    h, ds = policy.hidden, policy.state_dim
    w1 = np.empty((n, h, ds))
    b1 = np.empty((n, h))
    w2 = np.empty((n, h))
    b2 = np.empty(n)
    for i in range(n):
        a, b, c, d = policy.unpack(np.asarray(params, dtype=float), i)
        w1[i], b1[i], w2[i], b2[i] = a, b, c, d
    return w1, b1, w2, b2


def _sample_mountaincar(env: MountainCarEnv, policy: GaussianMlpPolicy, params,
                        count: int, horizon: int, rng: np.random.Generator,
                        backend: str) -> TrajectoryBatch:
    pos0 = rng.uniform(MC_RESET_LOW, MC_RESET_HIGH, (count, env.n_agents))
    eps = rng.standard_normal((count, horizon, env.n_agents))
    params = np.ascontiguousarray(params, dtype=float)
    if policy.hidden == 0:
        w = np.empty((env.n_agents, env.state_dim))
        b = np.empty(env.n_agents)
        for i in range(env.n_agents):
            w[i], b[i] = policy.unpack(params, i)
        states, actions, rewards = _py_kernels.mc_rollout_linear(
            pos0, eps, w, b, policy.sigma, env.goals)
    else:
        kernel = _backend.mc_rollout_kernel(backend)
        w1, b1, w2, b2 = _stack_mlp_params(policy, params)
        states, actions, rewards = kernel(pos0, eps, w1, b1, w2, b2,
                                          policy.sigma, env.goals)
    return TrajectoryBatch(states=states, actions=actions, rewards=rewards)


def _sample_tabular(mdp: TabularMDP, policy: TabularSoftmaxPolicy, params,
                    count: int, horizon: int, rng: np.random.Generator) -> TrajectoryBatch:
    u_init = rng.random(count)
    u_act = rng.random((count, horizon, mdp.n_agents))
    u_trans = rng.random((count, horizon))

    probs = policy.probs_table(params)
    act_cdf = probs.cumsum(axis=2)          # (n, S, A)
    trans_cdf = mdp._trans_cdf              # (S, A_flat, S)

    states = np.empty((count, horizon + 1), dtype=np.int64)
    actions = np.empty((count, horizon, mdp.n_agents), dtype=np.int64)
    rewards = np.empty((count, horizon, mdp.n_agents))

    s = np.minimum((mdp._init_cdf[None, :] <= u_init[:, None]).sum(axis=1),
                   mdp.n_states - 1)
    for t in range(horizon):
        states[:, t] = s
        flat = np.zeros(count, dtype=np.int64)
        for i in range(mdp.n_agents):
            cdf = act_cdf[i, s, :]
            a = np.minimum((cdf <= u_act[:, t, i, None]).sum(axis=1),
                           policy.n_actions - 1)
            actions[:, t, i] = a
            flat = flat * mdp.action_counts[i] + a
        rewards[:, t, :] = mdp.rewards[:, s, flat].T
        cdf = trans_cdf[s, flat, :]
        s = np.minimum((cdf <= u_trans[:, t, None]).sum(axis=1), mdp.n_states - 1)
    states[:, horizon] = s
    return TrajectoryBatch(states=states, actions=actions, rewards=rewards)


def sample_trajectories(env, policy, params, count: int, horizon: int,
                        rng: np.random.Generator, backend: str = "auto") -> TrajectoryBatch:
    """Sample ``count`` independent episodes of length ``horizon``."""
    if count < 1:
        raise ValueError(f"trajectory count must be >= 1, got {count}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if isinstance(env, MountainCarEnv) and isinstance(policy, GaussianMlpPolicy):
        return _sample_mountaincar(env, policy, params, count, horizon, rng, backend)
    if isinstance(env, TabularMDP) and isinstance(policy, TabularSoftmaxPolicy):
        return _sample_tabular(env, policy, params, count, horizon, rng)
    raise ValueError(f"unsupported env/policy pair: {type(env).__name__} with {type(policy).__name__}")
