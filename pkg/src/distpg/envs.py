"""Environments: multi-car MountainCar and enumerable tabular MDPs.

Both expose the same stepping contract: ``reset(rng) -> state`` and
``step(state, action, rng) -> StepResult``.  Episodes always run to a fixed
horizon; in MountainCar a car that has reached its goal freezes (zero
reward, no motion) instead of terminating the episode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# standard continuous MountainCar dynamics constants
MC_MIN_POS = -1.2
MC_MAX_POS = 0.6
MC_MAX_SPEED = 0.07
MC_FORCE = 0.0015
MC_GRAVITY = 0.0025
MC_GOAL = 0.45
MC_RESET_LOW = -0.6
MC_RESET_HIGH = -0.4
MC_GOAL_REWARD = 100.0
MC_ENERGY_COEF = 0.1

ENUMERATION_GUARD = 10 ** 6


@dataclass
class StepResult:
    next_state: object
    rewards: np.ndarray
    terminal: np.ndarray


class MountainCarEnv:
    """n cars in the classic valley; the global state is shared by all agents.

    State layout: positions of all cars, then velocities of all cars
    (length 2n).  Actions are per-car power coefficients in [-1, 1]; the
    per-step reward is the energy penalty -0.1*a^2 plus a one-time +100
    when a car first reaches its goal position.  Reached cars freeze.
    """

    kind = "mountaincar"
    discrete = False

    def __init__(self, n_agents: int, goal_positions=MC_GOAL):
        if n_agents < 1:
            raise ValueError("need at least one car")
        self.n_agents = n_agents
        goals = np.asarray(goal_positions, dtype=float)
        if goals.ndim == 0:
            goals = np.full(n_agents, float(goals))
        if goals.shape != (n_agents,):
            raise ValueError(f"expected {n_agents} goal positions, got shape {goals.shape}")
        if np.any(goals > MC_MAX_POS) or np.any(goals <= MC_MIN_POS):
            raise ValueError("goal positions must lie inside the track")
        self.goals = goals
        self.state_dim = 2 * n_agents

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        state = np.zeros(self.state_dim)
        state[: self.n_agents] = rng.uniform(MC_RESET_LOW, MC_RESET_HIGH, self.n_agents)
        return state

    def step(self, state: np.ndarray, action: np.ndarray, rng=None) -> StepResult:
        action = np.asarray(action, dtype=float)
        if action.shape != (self.n_agents,):
            raise ValueError(f"expected {self.n_agents} actions, got shape {action.shape}")
        if np.any(np.abs(action) > 1.0):
            raise ValueError(f"action out of range [-1, 1]: {action}")
        n = self.n_agents
        pos = state[:n].copy()
        vel = state[n:].copy()
        reached = pos >= self.goals

        new_vel = np.clip(vel + MC_FORCE * action - MC_GRAVITY * np.cos(3.0 * pos),
                          -MC_MAX_SPEED, MC_MAX_SPEED)
        new_pos = np.clip(pos + new_vel, MC_MIN_POS, MC_MAX_POS)
        new_vel = np.where((new_pos <= MC_MIN_POS) & (new_vel < 0.0), 0.0, new_vel)

        crossed = ~reached & (new_pos >= self.goals)
        rewards = np.where(reached, 0.0, -MC_ENERGY_COEF * action * action)
        rewards = rewards + np.where(crossed, MC_GOAL_REWARD, 0.0)

        pos = np.where(reached, pos, new_pos)
        vel = np.where(reached, vel, new_vel)
        next_state = np.concatenate([pos, vel])
        return StepResult(next_state=next_state, rewards=rewards, terminal=pos >= self.goals)


class TabularMDP:
    """Finite multi-agent MDP with explicit transition and reward tables.

    Joint actions are flattened C-order over per-agent action indices
    (the last agent varies fastest).  ``transitions`` has shape
    (S, A_flat, S), ``rewards`` has shape (n_agents, S, A_flat), and
    ``init_dist`` has shape (S,).
    """

    kind = "tabular"
    discrete = True

    def __init__(self, n_agents, action_counts, transitions, rewards, init_dist,
                 gamma: float = 0.99, horizon: int = 10):
        self.n_agents = n_agents
        self.action_counts = tuple(int(a) for a in action_counts)
        if len(self.action_counts) != n_agents:
            raise ValueError("need one action count per agent")
        self.n_joint = int(np.prod(self.action_counts))
        self.transitions = np.asarray(transitions, dtype=float)
        self.n_states = self.transitions.shape[0]
        if self.transitions.shape != (self.n_states, self.n_joint, self.n_states):
            raise ValueError(f"transition tensor has shape {self.transitions.shape}, "
                             f"expected ({self.n_states}, {self.n_joint}, {self.n_states})")
        row_sums = self.transitions.sum(axis=2)
        if np.max(np.abs(row_sums - 1.0)) > 1e-12:
            raise ValueError("every transition row must sum to 1 within 1e-12")
        if np.any(self.transitions < 0):
            raise ValueError("transition probabilities must be nonnegative")
        self.rewards = np.asarray(rewards, dtype=float)
        if self.rewards.shape != (n_agents, self.n_states, self.n_joint):
            raise ValueError(f"reward table has shape {self.rewards.shape}, "
                             f"expected ({n_agents}, {self.n_states}, {self.n_joint})")
        self.init_dist = np.asarray(init_dist, dtype=float)
        if self.init_dist.shape != (self.n_states,) or abs(self.init_dist.sum() - 1.0) > 1e-12 \
                or np.any(self.init_dist < 0):
            raise ValueError("initial distribution must be a probability vector over states")
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {gamma}")
        self.gamma = float(gamma)
        self.horizon = int(horizon)
        self._init_cdf = self.init_dist.cumsum()
        self._trans_cdf = self.transitions.cumsum(axis=2)

    def flat_action(self, action) -> int:
        return int(np.ravel_multi_index(tuple(int(a) for a in action), self.action_counts))

    def reset(self, rng: np.random.Generator) -> int:
        u = rng.random()
        return int(min(np.searchsorted(self._init_cdf, u, side="right"), self.n_states - 1))

    def step(self, state: int, action, rng: np.random.Generator) -> StepResult:
        state = int(state)
        action = np.asarray(action, dtype=int)
        if action.shape != (self.n_agents,):
            raise ValueError(f"expected {self.n_agents} actions, got shape {action.shape}")
        for i, a in enumerate(action):
            if not 0 <= a < self.action_counts[i]:
                raise ValueError(f"action {a} of agent {i} outside 0..{self.action_counts[i] - 1}")
        flat = self.flat_action(action)
        u = rng.random()
        nxt = int(min(np.searchsorted(self._trans_cdf[state, flat], u, side="right"),
                      self.n_states - 1))
        rewards = self.rewards[:, state, flat].copy()
        return StepResult(next_state=nxt, rewards=rewards,
                          terminal=np.zeros(self.n_agents, dtype=bool))

    @classmethod
    def from_json(cls, path, gamma: float = 0.99, horizon: int = 10) -> "TabularMDP":
        with open(path) as fh:
            doc = json.load(fh)
        mdp = cls(
            n_agents=len(doc["actions"]),
            action_counts=doc["actions"],
            transitions=doc["transitions"],
            rewards=doc["rewards"],
            init_dist=doc["init"],
            gamma=gamma,
            horizon=horizon,
        )
        declared = doc.get("states")
        if declared is not None and int(declared) != mdp.n_states:
            raise ValueError(f"file declares {declared} states but the transition "
                             f"tensor has {mdp.n_states}")
        return mdp


def make_parity_mdp(n_agents: int = 2, gamma: float = 0.9, horizon: int = 3,
                    reward_seed: int = 12345) -> TabularMDP:
    """Two-state MDP with deterministic parity transitions and fixed random
    reward tables; small enough for exhaustive trajectory enumeration.

    The next state is (s + sum of actions) mod 2, so every joint action
    sequence yields exactly one trajectory.
    """
    n_states = 2
    counts = [2] * n_agents
    n_joint = int(np.prod(counts))
    transitions = np.zeros((n_states, n_joint, n_states))
    for s in range(n_states):
        for flat in range(n_joint):
            acts = np.unravel_index(flat, counts)
            transitions[s, flat, (s + int(sum(acts))) % 2] = 1.0
    rng = np.random.default_rng(reward_seed)
    rewards = rng.uniform(0.0, 1.0, (n_agents, n_states, n_joint))
    init = np.zeros(n_states)
    init[0] = 1.0
    return TabularMDP(n_agents, counts, transitions, rewards, init,
                      gamma=gamma, horizon=horizon)


def make_timing_mdp(n_agents: int = 3, gamma: float = 0.95, horizon: int = 3,
                    gain: float = 1.0, costs=None) -> TabularMDP:
    """Commit-timing MDP whose optimal stationary policy is strictly
    stochastic, so the maximizer sits at finite logits.

    State 0 is the waiting state; the chance of committing (jumping to the
    absorbing state 1) is the fraction of agents that push.  Pushing pays
    immediately, but the absorbing state bleeds a per-agent maintenance
    cost.  A deterministic stationary policy either never commits or
    commits immediately; the best trade-off commits at an interior rate,
    which keeps exact-gradient ascent away from softmax saturation.
    """
    n_states = 2
    counts = [2] * n_agents
    n_joint = int(np.prod(counts))
    if costs is None:
        if n_agents == 1:
            costs = [0.6]
        else:
            costs = [0.45 + 0.3 * i / (n_agents - 1) for i in range(n_agents)]
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (n_agents,):
        raise ValueError(f"expected {n_agents} costs, got shape {costs.shape}")

    transitions = np.zeros((n_states, n_joint, n_states))
    rewards = np.zeros((n_agents, n_states, n_joint))
    for flat in range(n_joint):
        acts = np.unravel_index(flat, counts)
        push_frac = float(sum(acts)) / n_agents
        transitions[0, flat, 1] = push_frac
        transitions[0, flat, 0] = 1.0 - push_frac
        transitions[1, flat, 1] = 1.0
        rewards[:, 0, flat] = gain * push_frac
        rewards[:, 1, flat] = -costs
    init = np.zeros(n_states)
    init[0] = 1.0
    return TabularMDP(n_agents, counts, transitions, rewards, init,
                      gamma=gamma, horizon=horizon)


def enumerate_trajectories(mdp: TabularMDP, policy, params, horizon: int):
    """All trajectories of length ``horizon`` with their exact probabilities
    under the given tabular policy.

    Returns a list of ((states, actions), probability) where states has
    length horizon+1 and actions has shape (horizon, n_agents).  The
    probabilities sum to 1.
    """
    size = mdp.n_states ** (horizon + 1) * mdp.n_joint ** horizon
    if size > ENUMERATION_GUARD:
        raise ValueError(f"enumeration size {size} exceeds guard {ENUMERATION_GUARD}")
    probs_table = policy.probs_table(params)
    joint_shape = mdp.action_counts
    out = []

    def expand(states, actions, prob):
        h = len(actions)
        if h == horizon:
            out.append((
                (np.array(states, dtype=int), np.array(actions, dtype=int).reshape(horizon, mdp.n_agents)),
                prob,
            ))
            return
        s = states[-1]
        for flat in range(mdp.n_joint):
            acts = np.unravel_index(flat, joint_shape)
            p_act = prob
            for i, a in enumerate(acts):
                p_act *= probs_table[i, s, a]
            if p_act == 0.0:
                continue
            for nxt in range(mdp.n_states):
                p_tr = mdp.transitions[s, flat, nxt]
                if p_tr == 0.0:
                    continue
                expand(states + [nxt], actions + [list(acts)], p_act * p_tr)

    for s0 in range(mdp.n_states):
        if mdp.init_dist[s0] > 0.0:
            expand([s0], [], float(mdp.init_dist[s0]))
    return out
