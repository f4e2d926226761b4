"""Exact gradients and returns by exhaustive trajectory enumeration.

Only feasible for small tabular MDPs; the enumeration structure (state and
action index sequences, dynamics probabilities, discounted rewards) is
built once and reused, so repeated evaluations at new parameters are pure
vectorized table lookups.
"""

from __future__ import annotations

import numpy as np

from .envs import ENUMERATION_GUARD, TabularMDP
from .policies import TabularSoftmaxPolicy


class EnumeratedMdp:
    """Cached enumeration of every positive-probability trajectory."""

    def __init__(self, mdp: TabularMDP, horizon: int, gamma: float):
        size = mdp.n_states ** (horizon + 1) * mdp.n_joint ** horizon
        if size > ENUMERATION_GUARD:
            raise ValueError(f"enumeration size {size} exceeds guard {ENUMERATION_GUARD}")
        self.mdp = mdp
        self.horizon = horizon
        self.gamma = gamma

        states, actions, dyn = [], [], []
        joint_shape = mdp.action_counts

        def expand(path_states, path_actions, prob):
            if len(path_actions) == horizon:
                states.append(list(path_states))
                actions.append([list(a) for a in path_actions])
                dyn.append(prob)
                return
            s = path_states[-1]
            for flat in range(mdp.n_joint):
                acts = np.unravel_index(flat, joint_shape)
                for nxt in range(mdp.n_states):
                    p = mdp.transitions[s, flat, nxt]
                    if p == 0.0:
                        continue
                    expand(path_states + [nxt], path_actions + [acts], prob * p)

        for s0 in range(mdp.n_states):
            if mdp.init_dist[s0] > 0.0:
                expand([s0], [], float(mdp.init_dist[s0]))

        self.states = np.array(states, dtype=np.int64)          # (T, H+1)
        self.actions = np.array(actions, dtype=np.int64)        # (T, H, n)
        self.dyn_prob = np.array(dyn)                           # (T,)
        n_traj = self.states.shape[0]

        flat = np.zeros((n_traj, horizon), dtype=np.int64)
        for i in range(mdp.n_agents):
            flat = flat * mdp.action_counts[i] + self.actions[:, :, i]
        step_rewards = mdp.rewards[:, self.states[:, :horizon], flat]  # (n, T, H)
        disc = gamma ** np.arange(horizon)
        self.returns = (step_rewards * disc).sum(axis=2)               # (n, T)

    def _traj_probs(self, policy: TabularSoftmaxPolicy, params) -> np.ndarray:
        log_pi = policy.log_probs_table(params)
        total = np.zeros(self.states.shape[0])
        s = self.states[:, : self.horizon]
        for i in range(self.mdp.n_agents):
            total += log_pi[i, s, self.actions[:, :, i]].sum(axis=1)
        return self.dyn_prob * np.exp(total)

    def _select_returns(self, agent) -> np.ndarray:
        if agent == "collective":
            return self.returns.sum(axis=0)
        return self.returns[int(agent)]

    def expected_return(self, policy, params, agent="collective") -> float:
        return float(self._traj_probs(policy, params) @ self._select_returns(agent))

    def gradient(self, policy: TabularSoftmaxPolicy, params, agent="collective") -> np.ndarray:
        """Exact score-function gradient: sum over trajectories of
        p(traj) * grad log p(traj) * return(traj)."""
        p = self._traj_probs(policy, params)
        weights = p * self._select_returns(agent)          # (T,)
        probs = policy.probs_table(params)
        grad = np.zeros((policy.n_agents, policy.n_states, policy.n_actions))
        s = self.states[:, : self.horizon]
        step_w = np.repeat(weights[:, None], self.horizon, axis=1)
        occ = np.zeros(policy.n_states)
        np.add.at(occ, s.ravel(), step_w.ravel())
        for i in range(policy.n_agents):
            np.add.at(grad[i], (s.ravel(), self.actions[:, :, i].ravel()), step_w.ravel())
            grad[i] -= occ[:, None] * probs[i]
        return grad.ravel()


def exact_gradient(mdp: TabularMDP, policy, params, horizon: int, gamma: float,
                   agent="collective") -> np.ndarray:
    """One-shot exact gradient; build an EnumeratedMdp for repeated use."""
    return EnumeratedMdp(mdp, horizon, gamma).gradient(policy, params, agent)


def exact_return(mdp: TabularMDP, policy, params, horizon: int, gamma: float,
                 agent="collective") -> float:
    return EnumeratedMdp(mdp, horizon, gamma).expected_return(policy, params, agent)
