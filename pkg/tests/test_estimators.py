import math

import numpy as np
import pytest

from conftest import assert_within_3se, tabular_per_traj_grads
from distpg import estimators
from distpg.envs import TabularMDP
from distpg.oracle import EnumeratedMdp
from distpg.policies import TabularSoftmaxPolicy
from distpg.trajectories import sample_trajectories


def bandit_mdp(rewards):
    transitions = np.ones((1, 2, 1))
    return TabularMDP(1, [2], transitions, np.array([rewards]), [1.0],
                      gamma=0.9, horizon=1)


def test_gpomdp_single_step_reduction(rng):
    mdp = bandit_mdp([[1.0, 0.25]])
    policy = TabularSoftmaxPolicy(1, 1, 2)
    params = rng.normal(0, 0.5, 2)
    batch = sample_trajectories(mdp, policy, params, 50, 1, rng)
    baseline = 0.3
    est = estimators.gpomdp(batch, policy, params, 0.9, baseline=baseline, agent=0)
    expected = np.zeros(2)
    for j in range(50):
        traj = batch[j]
        expected += policy.grad_log_prob(params, int(traj.states[0]), traj.actions[0]) \
            * (traj.rewards[0, 0] - baseline)
    expected /= 50
    assert np.allclose(est.gradient, expected, atol=1e-12)


def test_gpomdp_zero_rewards(parity_mdp, parity_policy, rng):
    mdp = parity_mdp
    zero = TabularMDP(mdp.n_agents, mdp.action_counts, mdp.transitions,
                      np.zeros_like(mdp.rewards), mdp.init_dist,
                      gamma=mdp.gamma, horizon=mdp.horizon)
    params = rng.normal(0, 0.5, parity_policy.dim)
    batch = sample_trajectories(zero, parity_policy, params, 20, 3, rng)
    est = estimators.gpomdp(batch, parity_policy, params, 0.9, agent="collective")
    assert np.all(est.gradient == 0.0)


def test_gpomdp_empty_batch_rejected(parity_mdp, parity_policy, rng):
    params = np.zeros(parity_policy.dim)
    batch = sample_trajectories(parity_mdp, parity_policy, params, 2, 3, rng)
    empty = type(batch)(states=batch.states[:0], actions=batch.actions[:0],
                        rewards=batch.rewards[:0])
    with pytest.raises(ValueError):
        estimators.gpomdp(empty, parity_policy, params, 0.9)


def test_gpomdp_unbiased_vs_oracle(parity_mdp, parity_policy, rng):
    params = rng.normal(0, 0.4, parity_policy.dim)
    enum = EnumeratedMdp(parity_mdp, 3, 0.9)
    exact = enum.gradient(parity_policy, params, agent=0)
    batch = sample_trajectories(parity_mdp, parity_policy, params, 20000, 3, rng)
    weights = estimators._step_weights(batch, 0.9, 0.0, 0)
    per_traj = tabular_per_traj_grads(parity_policy, batch, params, weights)
    assert_within_3se(per_traj, exact, "gpomdp", factor=4.0)


def test_importance_weight_identity(parity_mdp, parity_policy, rng):
    params = rng.normal(0, 0.5, parity_policy.dim)
    batch = sample_trajectories(parity_mdp, parity_policy, params, 10, 3, rng)
    for j in range(10):
        iw = estimators.importance_weight(batch[j], parity_policy, params, params)
        assert iw.omega == 1.0
        assert iw.log_omega == 0.0


def test_importance_weight_single_step_ratio():
    policy = TabularSoftmaxPolicy(1, 1, 2)
    params_cur = np.zeros(2)                      # pi(a0) = 0.5
    params_ref = np.array([0.0, math.log(3.0)])   # pi(a0) = 0.25
    states = np.array([0, 0])
    actions = np.array([[0]])
    from distpg.trajectories import Trajectory
    traj = Trajectory(states=states, actions=actions, rewards=np.zeros((1, 1)))
    iw = estimators.importance_weight(traj, policy, params_cur, params_ref)
    assert iw.omega == pytest.approx(0.5, abs=1e-12)


def test_importance_weight_mean_one(parity_mdp, parity_policy, rng):
    params_cur = rng.normal(0, 0.4, parity_policy.dim)
    params_ref = params_cur + rng.normal(0, 0.3, parity_policy.dim)
    batch = sample_trajectories(parity_mdp, parity_policy, params_cur, 100000, 3, rng)
    omegas, clipped = estimators.batch_importance_weights(
        batch, parity_policy, params_cur, params_ref)
    assert clipped == 0
    se = omegas.std(ddof=1) / math.sqrt(len(omegas))
    assert abs(omegas.mean() - 1.0) <= 3 * se


def test_importance_weight_clipping(parity_mdp, parity_policy, rng):
    params_cur = np.zeros(parity_policy.dim)
    params_ref = np.zeros(parity_policy.dim)
    params_ref[::2] = 30.0  # reference policy almost deterministic
    batch = sample_trajectories(parity_mdp, parity_policy, params_cur, 50, 3, rng)
    omegas, clipped = estimators.batch_importance_weights(
        batch, parity_policy, params_cur, params_ref, log_cap=5.0)
    assert clipped > 0
    assert np.all(omegas <= math.exp(5.0) + 1e-12)
    assert np.all(omegas > 0)


def test_svrg_identity_at_anchor(parity_mdp, parity_policy, rng):
    params = rng.normal(0, 0.5, parity_policy.dim)
    batch = sample_trajectories(parity_mdp, parity_policy, params, 30, 3, rng)
    mu = rng.normal(0, 1.0, parity_policy.dim)
    est = estimators.svrg_estimate(batch, parity_policy, params, params, mu, 0.9, agent=0)
    assert np.array_equal(est.gradient, mu)
    assert est.clipped == 0


def test_svrg_single_episode_form(parity_mdp, parity_policy, rng):
    params_cur = rng.normal(0, 0.4, parity_policy.dim)
    params_ref = rng.normal(0, 0.4, parity_policy.dim)
    mu = rng.normal(0, 1.0, parity_policy.dim)
    batch = sample_trajectories(parity_mdp, parity_policy, params_cur, 1, 3, rng)
    est = estimators.svrg_estimate(batch, parity_policy, params_cur, params_ref,
                                   mu, 0.9, agent=1)
    traj = batch[0]
    weights = estimators._step_weights(batch, 0.9, 0.0, 1)[0]
    g_cur = parity_policy.weighted_score_sum(params_cur, traj.states[:3],
                                             traj.actions, weights)
    g_ref = parity_policy.weighted_score_sum(params_ref, traj.states[:3],
                                             traj.actions, weights)
    omega = estimators.importance_weight(traj, parity_policy, params_cur, params_ref).omega
    assert np.allclose(est.gradient, mu + g_cur - omega * g_ref, atol=1e-12)


def test_svrg_unbiased_at_shifted_params(parity_mdp, parity_policy, rng):
    params_ref = rng.normal(0, 0.4, parity_policy.dim)
    params_cur = params_ref + rng.normal(0, 0.2, parity_policy.dim)
    enum = EnumeratedMdp(parity_mdp, 3, 0.9)
    exact_cur = enum.gradient(parity_policy, params_cur, agent=0)
    mu_exact = enum.gradient(parity_policy, params_ref, agent=0)

    batch = sample_trajectories(parity_mdp, parity_policy, params_cur, 20000, 3, rng)
    weights = estimators._step_weights(batch, 0.9, 0.0, 0)
    per_cur = tabular_per_traj_grads(parity_policy, batch, params_cur, weights)
    omegas, _ = estimators.batch_importance_weights(batch, parity_policy,
                                                    params_cur, params_ref)
    per_ref = tabular_per_traj_grads(parity_policy, batch, params_ref,
                                     weights * omegas[:, None])
    per_v = mu_exact[None, :] + per_cur - per_ref
    assert_within_3se(per_v, exact_cur, "svrg", factor=4.0)


def test_outer_estimate_matches_gpomdp(parity_mdp, parity_policy, rng):
    params = rng.normal(0, 0.5, parity_policy.dim)
    batch = sample_trajectories(parity_mdp, parity_policy, params, 7, 3, rng)
    a = estimators.outer_estimate(batch, parity_policy, params, 0.9, agent=1)
    b = estimators.gpomdp(batch, parity_policy, params, 0.9, agent=1)
    assert np.array_equal(a.gradient, b.gradient)


def test_outer_estimate_linear_in_batches(parity_mdp, parity_policy, rng):
    params = rng.normal(0, 0.5, parity_policy.dim)
    batch = sample_trajectories(parity_mdp, parity_policy, params, 10, 3, rng)
    first = type(batch)(states=batch.states[:4], actions=batch.actions[:4],
                        rewards=batch.rewards[:4])
    second = type(batch)(states=batch.states[4:], actions=batch.actions[4:],
                         rewards=batch.rewards[4:])
    full = estimators.outer_estimate(batch, parity_policy, params, 0.9, agent=0).gradient
    g1 = estimators.outer_estimate(first, parity_policy, params, 0.9, agent=0).gradient
    g2 = estimators.outer_estimate(second, parity_policy, params, 0.9, agent=0).gradient
    assert np.allclose(full, 0.4 * g1 + 0.6 * g2, atol=1e-12)


def test_constant_baseline_unbiased(rng):
    mdp = bandit_mdp([[1.0, 0.0]])
    policy = TabularSoftmaxPolicy(1, 1, 2)
    params = rng.normal(0, 0.3, 2)
    batch = sample_trajectories(mdp, policy, params, 50000, 1, rng)
    w0 = estimators._step_weights(batch, 0.9, 0.0, 0)
    wb = estimators._step_weights(batch, 0.9, 2.5, 0)
    per0 = tabular_per_traj_grads(policy, batch, params, w0)
    perb = tabular_per_traj_grads(policy, batch, params, wb)
    diff = per0 - perb
    se = diff.std(axis=0, ddof=1) / math.sqrt(len(diff))
    assert np.all(np.abs(diff.mean(axis=0)) <= 3 * np.maximum(se, 1e-14))
