import math

import numpy as np
import pytest

from distpg.policies import (GaussianMlpPolicy, TabularSoftmaxPolicy,
                             finite_diff_check)

LOG_2PI = math.log(2.0 * math.pi)


def test_tabular_probs_normalized(rng):
    policy = TabularSoftmaxPolicy(3, 4, 5)
    params = rng.normal(0, 2.0, policy.dim)
    probs = policy.probs_table(params)
    assert np.max(np.abs(probs.sum(axis=2) - 1.0)) <= 1e-12
    assert np.all(probs > 0)


def test_tabular_uniform_grad():
    policy = TabularSoftmaxPolicy(1, 1, 2)
    grad = policy.grad_log_prob(np.zeros(2), 0, np.array([0]))
    assert np.allclose(grad, [0.5, -0.5], atol=1e-15)


def test_tabular_uniform_log_prob():
    policy = TabularSoftmaxPolicy(2, 1, 2)
    assert policy.log_prob(np.zeros(4), 0, np.array([1, 0])) == pytest.approx(
        2 * math.log(0.5), abs=1e-12)


def test_tabular_log_prob_matches_softmax(rng):
    policy = TabularSoftmaxPolicy(2, 3, 4)
    params = rng.normal(0, 1.5, policy.dim)
    table = params.reshape(2, 3, 4)
    for _ in range(20):
        s = int(rng.integers(3))
        a = rng.integers(4, size=2)
        direct = 1.0
        for i in range(2):
            e = np.exp(table[i, s])
            direct *= e[a[i]] / e.sum()
        assert math.exp(policy.log_prob(params, s, a)) == pytest.approx(direct, abs=1e-12)


def test_tabular_score_rows_sum_zero(rng):
    policy = TabularSoftmaxPolicy(2, 3, 4)
    params = rng.normal(0, 1.0, policy.dim)
    grad = policy.grad_log_prob(params, 1, np.array([2, 0])).reshape(2, 3, 4)
    assert np.max(np.abs(grad.sum(axis=2))) <= 1e-12


def test_gaussian_log_prob_at_mean():
    policy = GaussianMlpPolicy(2, 4, hidden=0, sigma=1.0)
    params = np.zeros(policy.dim)
    state = np.zeros(4)
    action = np.zeros(2)  # equals the mean
    assert policy.log_prob(params, state, action) == pytest.approx(-LOG_2PI, abs=1e-12)


def test_linear_gaussian_grad_closed_form(rng):
    # mean = w . s + b gives grad = ((a - mu)/sigma^2) * (s, 1)
    policy = GaussianMlpPolicy(1, 3, hidden=0, sigma=0.7)
    params = rng.normal(0, 1.0, policy.dim)
    state = rng.normal(0, 1.0, 3)
    action = rng.normal(0, 1.0, 1)
    mu = params[:3] @ state + params[3]
    delta = (action[0] - mu) / 0.49
    expected = np.concatenate([delta * state, [delta]])
    grad = policy.grad_log_prob(params, state, action)
    assert np.allclose(grad, expected, atol=1e-12)


@pytest.mark.parametrize("maker,tol", [
    (lambda: TabularSoftmaxPolicy(2, 3, 3), 1e-8),
    (lambda: GaussianMlpPolicy(2, 3, hidden=0, sigma=0.5), 1e-8),
    (lambda: GaussianMlpPolicy(1, 3, hidden=64, sigma=0.5), 1e-5),
])
def test_finite_diff_agreement(maker, tol, rng):
    policy = maker()
    for _ in range(5):
        params = rng.normal(0, 0.5, policy.dim)
        if isinstance(policy, TabularSoftmaxPolicy):
            state = int(rng.integers(policy.n_states))
            action = rng.integers(policy.n_actions, size=policy.n_agents)
        else:
            state = rng.normal(0, 1.0, policy.state_dim)
            action = rng.normal(0, 1.0, policy.n_agents)
        assert finite_diff_check(policy, params, state, action, 1e-5) <= tol


def test_gaussian_act_mean(rng):
    policy = GaussianMlpPolicy(1, 2, hidden=8, sigma=0.1)
    params = rng.normal(0, 0.5, policy.dim)
    state = rng.normal(0, 1.0, 2)
    mu = policy.mean_actions(params, state)[0, 0]
    draws = np.array([policy.act(params, state, rng)[0] for _ in range(100000)])
    assert abs(draws.mean() - mu) <= 3 * 0.1 / math.sqrt(len(draws))


def test_act_deterministic_given_seed():
    policy = GaussianMlpPolicy(2, 3, hidden=4, sigma=0.5)
    params = np.random.default_rng(1).normal(0, 0.5, policy.dim)
    state = np.array([0.1, -0.2, 0.3])
    a1 = policy.act(params, state, np.random.default_rng(99))
    a2 = policy.act(params, state, np.random.default_rng(99))
    assert np.array_equal(a1, a2)


def test_tabular_act_uniform_frequencies(rng):
    policy = TabularSoftmaxPolicy(1, 1, 3)
    draws = np.array([policy.act(np.zeros(3), 0, rng)[0] for _ in range(30000)])
    freq = np.bincount(draws, minlength=3) / len(draws)
    se = math.sqrt((1 / 3) * (2 / 3) / len(draws))
    assert np.max(np.abs(freq - 1 / 3)) <= 3 * se


def test_score_zero_mean_tabular(rng):
    policy = TabularSoftmaxPolicy(1, 1, 3)
    params = rng.normal(0, 1.0, policy.dim)
    grads = []
    for _ in range(20000):
        a = policy.act(params, 0, rng)
        grads.append(policy.grad_log_prob(params, 0, a))
    grads = np.array(grads)
    se = grads.std(axis=0, ddof=1) / math.sqrt(len(grads))
    assert np.all(np.abs(grads.mean(axis=0)) <= 3 * np.maximum(se, 1e-14))


def test_score_zero_mean_gaussian(rng):
    policy = GaussianMlpPolicy(1, 2, hidden=0, sigma=0.5)
    params = rng.normal(0, 0.5, policy.dim)
    state = np.array([0.4, -0.1])
    states = np.tile(state, (20000, 1))
    actions = policy.mean_actions(params, states) + 0.5 * rng.standard_normal((20000, 1))
    grads = np.stack([policy.weighted_score_sum(params, states[i:i + 1],
                                                actions[i:i + 1], np.ones(1))
                      for i in range(2000)])
    se = grads.std(axis=0, ddof=1) / math.sqrt(len(grads))
    assert np.all(np.abs(grads.mean(axis=0)) <= 3 * np.maximum(se, 1e-14))


def test_nan_params_rejected():
    policy = GaussianMlpPolicy(1, 2, hidden=0, sigma=0.5)
    bad = np.full(policy.dim, np.nan)
    with pytest.raises(ValueError):
        policy.act(bad, np.zeros(2), np.random.default_rng(0))


def test_mlp_init_zero_mean_output(rng):
    policy = GaussianMlpPolicy(3, 6, hidden=16, sigma=0.5)
    params = policy.init_params(rng)
    states = rng.normal(0, 1.0, (50, 6))
    assert np.all(policy.mean_actions(params, states) == 0.0)
