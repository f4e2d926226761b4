"""Stochastic joint policies with exact score-function gradients.

Two families:

* ``GaussianMlpPolicy`` — per-agent scalar-mean network over the shared
  global state (single tanh hidden layer, or linear when ``hidden=0``),
  fixed standard deviation.  Used for the continuous control experiments.
* ``TabularSoftmaxPolicy`` — per-agent logit table over discrete states,
  fully enumerable, used wherever exact gradients are needed for testing.

A parameter vector always holds the WHOLE joint policy (every agent's
sub-policy); in the distributed algorithm each agent carries its own copy
of this full vector and consensus drives the copies together.

All operations are pure functions of (params, state, action); batched
variants treat the leading axis as independent time steps.
"""

from __future__ import annotations

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class GaussianMlpPolicy:
    """Joint Gaussian policy; each agent's mean is an MLP of the global state.

    Parameter layout (flat, agent-major): for each agent, W1 (hidden x
    state_dim, row-major), b1 (hidden), w2 (hidden), b2 (1).  With
    ``hidden=0`` the block degenerates to a linear mean: w (state_dim), b (1).
    """

    def __init__(self, n_agents: int, state_dim: int, hidden: int = 64, sigma: float = 0.5):
        if sigma <= 0:
            raise ValueError(f"policy stddev must be positive, got {sigma}")
        if hidden < 0:
            raise ValueError(f"hidden width must be >= 0, got {hidden}")
        self.n_agents = n_agents
        self.state_dim = state_dim
        self.hidden = hidden
        self.sigma = float(sigma)
        if hidden > 0:
            self.block = hidden * state_dim + hidden + hidden + 1
        else:
            self.block = state_dim + 1
        self.dim = n_agents * self.block

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Hidden weights uniform in +-1/sqrt(fan_in), output layer zeros.

        The zero output layer makes the initial mean action 0 everywhere.
        """
        params = np.zeros(self.dim)
        if self.hidden > 0:
            bound = 1.0 / math.sqrt(self.state_dim)
            for i in range(self.n_agents):
                base = i * self.block
                k = self.hidden * self.state_dim
                params[base:base + k] = rng.uniform(-bound, bound, k)
                # b1, w2, b2 stay zero
        return params

    def unpack(self, params: np.ndarray, agent: int):
        base = agent * self.block
        if self.hidden > 0:
            h, ds = self.hidden, self.state_dim
            w1 = params[base:base + h * ds].reshape(h, ds)
            b1 = params[base + h * ds:base + h * ds + h]
            w2 = params[base + h * ds + h:base + h * ds + 2 * h]
            b2 = params[base + h * ds + 2 * h]
            return w1, b1, w2, b2
        ds = self.state_dim
        return params[base:base + ds], params[base + ds]

    def _check(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.dim,):
            raise ValueError(f"expected parameter vector of length {self.dim}, got shape {params.shape}")
        if not np.all(np.isfinite(params)):
            raise ValueError("parameter vector contains non-finite entries")
        return params

    def mean_actions(self, params: np.ndarray, states: np.ndarray) -> np.ndarray:
        """Mean action of every agent at each state; states (T, state_dim)."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        mus = np.empty((states.shape[0], self.n_agents))
        for i in range(self.n_agents):
            if self.hidden > 0:
                w1, b1, w2, b2 = self.unpack(params, i)
                hid = np.tanh(states @ w1.T + b1)
                mus[:, i] = hid @ w2 + b2
            else:
                w, b = self.unpack(params, i)
                mus[:, i] = states @ w + b
        return mus

    def act(self, params: np.ndarray, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        params = self._check(params)
        mu = self.mean_actions(params, state)[0]
        return mu + self.sigma * rng.standard_normal(self.n_agents)

    def step_log_probs(self, params: np.ndarray, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Joint log-density per step; states (T, ds), actions (T, n)."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.atleast_2d(np.asarray(actions, dtype=float))
        mus = self.mean_actions(params, states)
        z = (actions - mus) / self.sigma
        per_agent = -0.5 * z * z - math.log(self.sigma) - 0.5 * LOG_2PI
        return per_agent.sum(axis=1)

    def log_prob(self, params: np.ndarray, state: np.ndarray, action: np.ndarray) -> float:
        params = self._check(params)
        return float(self.step_log_probs(params, state, np.asarray(action)[None, :])[0])

    def weighted_score_sum(self, params: np.ndarray, states: np.ndarray,
                           actions: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """sum_t weights[t] * grad log pi(actions[t] | states[t]).

        The workhorse of every likelihood-ratio estimator; one pass of
        dense linear algebra per agent block.
        """
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.atleast_2d(np.asarray(actions, dtype=float))
        weights = np.asarray(weights, dtype=float)
        grad = np.zeros(self.dim)
        inv_var = 1.0 / (self.sigma * self.sigma)
        for i in range(self.n_agents):
            base = i * self.block
            if self.hidden > 0:
                w1, b1, w2, b2 = self.unpack(params, i)
                hid = np.tanh(states @ w1.T + b1)
                mu = hid @ w2 + b2
                wdelta = weights * (actions[:, i] - mu) * inv_var
                dpre = (wdelta[:, None] * w2) * (1.0 - hid * hid)
                h, ds = self.hidden, self.state_dim
                grad[base:base + h * ds] = (dpre.T @ states).ravel()
                grad[base + h * ds:base + h * ds + h] = dpre.sum(axis=0)
                grad[base + h * ds + h:base + h * ds + 2 * h] = hid.T @ wdelta
                grad[base + h * ds + 2 * h] = wdelta.sum()
            else:
                w, b = self.unpack(params, i)
                mu = states @ w + b
                wdelta = weights * (actions[:, i] - mu) * inv_var
                ds = self.state_dim
                grad[base:base + ds] = states.T @ wdelta
                grad[base + ds] = wdelta.sum()
        return grad

    def grad_log_prob(self, params: np.ndarray, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        params = self._check(params)
        return self.weighted_score_sum(params, np.asarray(state)[None, :],
                                       np.asarray(action)[None, :], np.ones(1))


class TabularSoftmaxPolicy:
    """Per-agent softmax over a logit table theta[agent, state, action]."""

    def __init__(self, n_agents: int, n_states: int, n_actions: int):
        self.n_agents = n_agents
        self.n_states = n_states
        self.n_actions = n_actions
        self.dim = n_agents * n_states * n_actions

    def init_params(self, rng: np.random.Generator = None, scale: float = 0.1) -> np.ndarray:
        """Small random logits; zeros (the uniform policy) when rng is None."""
        if rng is None:
            return np.zeros(self.dim)
        return rng.normal(0.0, scale, self.dim)

    def _table(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.dim,):
            raise ValueError(f"expected parameter vector of length {self.dim}, got shape {params.shape}")
        if not np.all(np.isfinite(params)):
            raise ValueError("parameter vector contains non-finite entries")
        return params.reshape(self.n_agents, self.n_states, self.n_actions)

    def log_probs_table(self, params: np.ndarray) -> np.ndarray:
        """Log pi_i(a|s) for all (agent, state, action), numerically stable."""
        logits = self._table(params)
        shifted = logits - logits.max(axis=2, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=2, keepdims=True))

    def probs_table(self, params: np.ndarray) -> np.ndarray:
        return np.exp(self.log_probs_table(params))

    def act(self, params: np.ndarray, state: int, rng: np.random.Generator) -> np.ndarray:
        probs = self.probs_table(params)[:, int(state), :]
        u = rng.random(self.n_agents)
        cdf = probs.cumsum(axis=1)
        return np.minimum((cdf < u[:, None]).sum(axis=1), self.n_actions - 1)

    def step_log_probs(self, params: np.ndarray, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        states = np.atleast_1d(np.asarray(states, dtype=int))
        actions = np.atleast_2d(np.asarray(actions, dtype=int))
        table = self.log_probs_table(params)
        total = np.zeros(states.shape[0])
        for i in range(self.n_agents):
            total += table[i, states, actions[:, i]]
        return total

    def log_prob(self, params: np.ndarray, state: int, action: np.ndarray) -> float:
        return float(self.step_log_probs(params, np.asarray([state]), np.asarray(action)[None, :])[0])

    def weighted_score_sum(self, params: np.ndarray, states: np.ndarray,
                           actions: np.ndarray, weights: np.ndarray) -> np.ndarray:
        states = np.atleast_1d(np.asarray(states, dtype=int))
        actions = np.atleast_2d(np.asarray(actions, dtype=int))
        weights = np.asarray(weights, dtype=float)
        probs = self.probs_table(params)
        grad = np.zeros((self.n_agents, self.n_states, self.n_actions))
        # state-occupancy weights are shared across agents
        occ = np.zeros(self.n_states)
        np.add.at(occ, states, weights)
        for i in range(self.n_agents):
            np.add.at(grad[i], (states, actions[:, i]), weights)
            grad[i] -= occ[:, None] * probs[i]
        return grad.ravel()

    def grad_log_prob(self, params: np.ndarray, state: int, action: np.ndarray) -> np.ndarray:
        return self.weighted_score_sum(params, np.asarray([state]),
                                       np.asarray(action)[None, :], np.ones(1))


def act(policy, params, state, rng):
    return policy.act(params, state, rng)


def log_prob(policy, params, state, action) -> float:
    return policy.log_prob(params, state, action)


def grad_log_prob(policy, params, state, action) -> np.ndarray:
    return policy.grad_log_prob(params, state, action)


def finite_diff_check(policy, params, state, action, h: float = 1e-5) -> float:
    """Worst relative error of the analytic score against central differences."""
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    params = np.asarray(params, dtype=float)
    analytic = policy.grad_log_prob(params, state, action)
    numeric = np.empty_like(analytic)
    work = params.copy()
    for j in range(params.size):
        orig = work[j]
        work[j] = orig + h
        up = policy.log_prob(work, state, action)
        work[j] = orig - h
        down = policy.log_prob(work, state, action)
        work[j] = orig
        numeric[j] = (up - down) / (2.0 * h)
    scale = np.maximum(np.abs(analytic), np.maximum(np.abs(numeric), 1.0))
    return float(np.max(np.abs(analytic - numeric) / scale))
