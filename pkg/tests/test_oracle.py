import numpy as np
import pytest

from distpg.envs import TabularMDP, make_parity_mdp
from distpg.oracle import EnumeratedMdp, exact_gradient, exact_return
from distpg.policies import TabularSoftmaxPolicy


def test_bandit_uniform_gradient():
    # two arms with rewards (1, 0): gradient at the uniform policy is
    # pi0*pi1*(r0 - r1) in the (+, -) direction
    transitions = np.ones((1, 2, 1))
    mdp = TabularMDP(1, [2], transitions, np.array([[[1.0, 0.0]]]), [1.0],
                     gamma=0.5, horizon=1)
    policy = TabularSoftmaxPolicy(1, 1, 2)
    grad = exact_gradient(mdp, policy, np.zeros(2), horizon=1, gamma=0.5)
    assert np.allclose(grad, [0.25, -0.25], atol=1e-14)


def test_zero_rewards_zero_gradient(rng):
    mdp = make_parity_mdp(2)
    zero = TabularMDP(2, [2, 2], mdp.transitions, np.zeros_like(mdp.rewards),
                      mdp.init_dist, gamma=0.9, horizon=3)
    policy = TabularSoftmaxPolicy(2, 2, 2)
    grad = exact_gradient(zero, policy, rng.normal(0, 1, 8), horizon=3, gamma=0.9)
    assert np.all(grad == 0.0)


def test_gradient_matches_finite_differences(parity_mdp, parity_policy, rng):
    enum = EnumeratedMdp(parity_mdp, 3, 0.9)
    for agent in (0, 1, "collective"):
        params = rng.normal(0, 0.6, parity_policy.dim)
        grad = enum.gradient(parity_policy, params, agent=agent)
        fd = np.empty_like(grad)
        h = 1e-6
        work = params.copy()
        for j in range(len(params)):
            orig = work[j]
            work[j] = orig + h
            up = enum.expected_return(parity_policy, work, agent=agent)
            work[j] = orig - h
            down = enum.expected_return(parity_policy, work, agent=agent)
            work[j] = orig
            fd[j] = (up - down) / (2 * h)
        assert np.max(np.abs(grad - fd)) <= 1e-8


def test_collective_is_sum_of_agents(parity_mdp, parity_policy, rng):
    enum = EnumeratedMdp(parity_mdp, 3, 0.9)
    params = rng.normal(0, 0.5, parity_policy.dim)
    total = enum.gradient(parity_policy, params, agent="collective")
    parts = sum(enum.gradient(parity_policy, params, agent=i) for i in range(2))
    assert np.allclose(total, parts, atol=1e-12)
    r_total = enum.expected_return(parity_policy, params, agent="collective")
    r_parts = sum(enum.expected_return(parity_policy, params, agent=i) for i in range(2))
    assert r_total == pytest.approx(r_parts, abs=1e-12)


def test_exact_return_uniform_bandit():
    transitions = np.ones((1, 2, 1))
    mdp = TabularMDP(1, [2], transitions, np.array([[[1.0, 0.0]]]), [1.0],
                     gamma=0.5, horizon=1)
    policy = TabularSoftmaxPolicy(1, 1, 2)
    assert exact_return(mdp, policy, np.zeros(2), 1, 0.5) == pytest.approx(0.5)


def test_guard_exceeded():
    mdp = make_parity_mdp(2)
    with pytest.raises(ValueError):
        EnumeratedMdp(mdp, 12, 0.9)
