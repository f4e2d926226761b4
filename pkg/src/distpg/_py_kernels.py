"""Pure-numpy rollout kernels (fallback for the compiled extension).

The sequential MountainCar rollout is the hot loop of the whole simulator:
each time step needs one small MLP forward per agent plus the car dynamics,
and steps cannot be vectorized over time.  Both backends implement the same
contract and consume the same pre-drawn random arrays, so a given seed
visits the same random sequence regardless of backend.
"""

from __future__ import annotations

import numpy as np

from .envs import (MC_ENERGY_COEF, MC_FORCE, MC_GOAL_REWARD, MC_GRAVITY,
                   MC_MAX_POS, MC_MAX_SPEED, MC_MIN_POS)


def mc_rollout(pos0, eps, w1, b1, w2, b2, sigma, goals):
    """Roll out a batch of MountainCar episodes under a Gaussian MLP policy.

    pos0: (N, n) initial positions (velocities start at zero)
    eps:  (N, H, n) pre-drawn standard normals, one per step and car
    w1, b1, w2, b2: stacked per-agent MLP parameters,
        shapes (n, hid, 2n), (n, hid), (n, hid), (n,)
    Returns (states, actions, rewards) with shapes
    (N, H+1, 2n), (N, H, n), (N, H, n).  Actions are the raw Gaussian
    samples; the dynamics and energy penalty use the [-1, 1] clamp.
    """
    pos0 = np.asarray(pos0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    n_traj, n = pos0.shape
    horizon = eps.shape[1]
    states = np.empty((n_traj, horizon + 1, 2 * n))
    actions = np.empty((n_traj, horizon, n))
    rewards = np.empty((n_traj, horizon, n))

    pos = pos0.copy()
    vel = np.zeros_like(pos)
    for t in range(horizon):
        states[:, t, :n] = pos
        states[:, t, n:] = vel
        state = states[:, t, :]
        mu = np.empty((n_traj, n))
        for i in range(n):
            hid = np.tanh(state @ w1[i].T + b1[i])
            mu[:, i] = hid @ w2[i] + b2[i]
        a = mu + sigma * eps[:, t, :]
        actions[:, t, :] = a
        a_env = np.clip(a, -1.0, 1.0)

        reached = pos >= goals
        new_vel = np.clip(vel + MC_FORCE * a_env - MC_GRAVITY * np.cos(3.0 * pos),
                          -MC_MAX_SPEED, MC_MAX_SPEED)
        new_pos = np.clip(pos + new_vel, MC_MIN_POS, MC_MAX_POS)
        new_vel = np.where((new_pos <= MC_MIN_POS) & (new_vel < 0.0), 0.0, new_vel)

        crossed = ~reached & (new_pos >= goals)
        rewards[:, t, :] = np.where(reached, 0.0, -MC_ENERGY_COEF * a_env * a_env)
        rewards[:, t, :] += np.where(crossed, MC_GOAL_REWARD, 0.0)

        pos = np.where(reached, pos, new_pos)
        vel = np.where(reached, vel, new_vel)

    states[:, horizon, :n] = pos
    states[:, horizon, n:] = vel
    return states, actions, rewards


def mc_rollout_linear(pos0, eps, w, b, sigma, goals):
    """Same contract as mc_rollout for a linear mean (hidden width 0).

    w: (n, 2n) per-agent linear weights, b: (n,) biases.
    """
    pos0 = np.asarray(pos0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    n_traj, n = pos0.shape
    horizon = eps.shape[1]
    states = np.empty((n_traj, horizon + 1, 2 * n))
    actions = np.empty((n_traj, horizon, n))
    rewards = np.empty((n_traj, horizon, n))

    pos = pos0.copy()
    vel = np.zeros_like(pos)
    for t in range(horizon):
        states[:, t, :n] = pos
        states[:, t, n:] = vel
        mu = states[:, t, :] @ w.T + b
        a = mu + sigma * eps[:, t, :]
        actions[:, t, :] = a
        a_env = np.clip(a, -1.0, 1.0)

        reached = pos >= goals
        new_vel = np.clip(vel + MC_FORCE * a_env - MC_GRAVITY * np.cos(3.0 * pos),
                          -MC_MAX_SPEED, MC_MAX_SPEED)
        new_pos = np.clip(pos + new_vel, MC_MIN_POS, MC_MAX_POS)
        new_vel = np.where((new_pos <= MC_MIN_POS) & (new_vel < 0.0), 0.0, new_vel)

        crossed = ~reached & (new_pos >= goals)
        rewards[:, t, :] = np.where(reached, 0.0, -MC_ENERGY_COEF * a_env * a_env)
        rewards[:, t, :] += np.where(crossed, MC_GOAL_REWARD, 0.0)

        pos = np.where(reached, pos, new_pos)
        vel = np.where(reached, vel, new_vel)

    states[:, horizon, :n] = pos
    states[:, horizon, n:] = vel
    return states, actions, rewards
