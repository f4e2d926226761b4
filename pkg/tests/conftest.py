import numpy as np
import pytest

from distpg.envs import make_parity_mdp, make_timing_mdp
from distpg.policies import TabularSoftmaxPolicy


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def parity_mdp():
    return make_parity_mdp(2, gamma=0.9, horizon=3)


@pytest.fixture
def parity_policy():
    return TabularSoftmaxPolicy(2, 2, 2)


@pytest.fixture
def timing_mdp():
    return make_timing_mdp(3, gamma=0.95, horizon=3)


def tabular_per_traj_grads(policy, batch, params, weights):
    """Per-trajectory score-weighted gradients, vectorized for tabular
    policies; used to form Monte Carlo standard errors."""
    n_traj, horizon = weights.shape
    probs = policy.probs_table(params)
    grads = np.zeros((n_traj, policy.n_agents, policy.n_states, policy.n_actions))
    s = batch.states[:, :horizon]
    traj_idx = np.repeat(np.arange(n_traj), horizon)
    s_flat = s.ravel()
    w_flat = weights.ravel()
    occ = np.zeros((n_traj, policy.n_states))
    np.add.at(occ, (traj_idx, s_flat), w_flat)
    for i in range(policy.n_agents):
        a_flat = batch.actions[:, :, i].ravel()
        np.add.at(grads, (traj_idx, np.full_like(traj_idx, i), s_flat, a_flat), w_flat)
        grads[:, i, :, :] -= occ[:, :, None] * probs[i][None, :, :]
    return grads.reshape(n_traj, policy.dim)


def assert_within_3se(mc_samples, exact, label="", factor=3.0):
    """Componentwise z-test of the Monte Carlo mean against an exact value."""
    mean = mc_samples.mean(axis=0)
    se = mc_samples.std(axis=0, ddof=1) / np.sqrt(mc_samples.shape[0])
    z = np.abs(mean - np.asarray(exact)) / np.maximum(se, 1e-14)
    assert np.all(z <= factor), f"{label}: max z = {z.max():.2f} exceeds {factor}"
