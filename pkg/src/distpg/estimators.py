"""Policy-gradient estimators: per-step likelihood-ratio estimator with a
reward-to-go weighting, trajectory importance weights, and the
variance-reduced combination anchored at a reference parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trajectories import Trajectory, TrajectoryBatch

DEFAULT_LOG_CAP = 20.0


@dataclass
class GradEstimate:
    gradient: np.ndarray
    count: int
    clipped: int = 0


@dataclass
class ImportanceWeight:
    log_omega: float
    omega: float


def _select_rewards(batch: TrajectoryBatch, agent) -> np.ndarray:
    if agent == "collective":
        return batch.rewards.sum(axis=2)
    return batch.rewards[:, :, int(agent)]


def _step_weights(batch: TrajectoryBatch, gamma: float, baseline: float, agent) -> np.ndarray:
    """Per-step coefficient of the score function.

    The estimator sums, over steps h, the score prefix up to h times
    (gamma^h * R_h - baseline); regrouping by the step of each score term
    gives coefficient c_t = sum_{h >= t} (gamma^h R_h - baseline).
    """
    r = _select_rewards(batch, agent)
    horizon = r.shape[1]
    disc = r * gamma ** np.arange(horizon) - baseline
    return disc[:, ::-1].cumsum(axis=1)[:, ::-1]


def gpomdp(batch: TrajectoryBatch, policy, params, gamma: float,
           baseline: float = 0.0, agent="collective") -> GradEstimate:
    """Batch-mean policy-gradient estimate from complete episodes.

    ``agent`` selects whose rewards weight the scores: an agent index for a
    local objective, or "collective" for the sum over agents.
    """
    if len(batch) == 0:
        raise ValueError("cannot estimate a gradient from an empty batch")
    weights = _step_weights(batch, gamma, baseline, agent)
    states, actions = batch.flat_steps()
    grad = policy.weighted_score_sum(params, states, actions,
                                     weights.ravel() / len(batch))
    return GradEstimate(gradient=grad, count=len(batch))


def outer_estimate(batch: TrajectoryBatch, policy, params_ref, gamma: float,
                   baseline: float = 0.0, agent="collective") -> GradEstimate:
    """Anchor gradient at the reference parameters: mean of per-episode
    estimates, which equals the batch estimator by linearity."""
    return gpomdp(batch, policy, params_ref, gamma, baseline=baseline, agent=agent)


def importance_weight(traj: Trajectory, policy, params_cur, params_ref,
                      log_cap: float = DEFAULT_LOG_CAP) -> ImportanceWeight:
    """Likelihood ratio of one episode under reference vs current policy.

    Dynamics and the initial distribution cancel, leaving the per-step
    policy density ratios.  The log ratio is clamped to +-log_cap before
    exponentiation.
    """
    horizon = traj.horizon
    states = traj.states[:horizon]
    lp_ref = policy.step_log_probs(params_ref, states, traj.actions)
    lp_cur = policy.step_log_probs(params_cur, states, traj.actions)
    log_omega = float((lp_ref - lp_cur).sum())
    if np.isnan(log_omega):
        raise ValueError("importance weight is NaN; check policy parameters")
    return ImportanceWeight(log_omega=log_omega,
                            omega=float(np.exp(np.clip(log_omega, -log_cap, log_cap))))


def batch_importance_weights(batch: TrajectoryBatch, policy, params_cur, params_ref,
                             log_cap: float = DEFAULT_LOG_CAP):
    """Vectorized trajectory weights; returns (omegas, clip count)."""
    n, h = len(batch), batch.horizon
    states, actions = batch.flat_steps()
    lp_ref = policy.step_log_probs(params_ref, states, actions).reshape(n, h)
    lp_cur = policy.step_log_probs(params_cur, states, actions).reshape(n, h)
    log_omega = (lp_ref - lp_cur).sum(axis=1)
    if np.any(np.isnan(log_omega)):
        raise ValueError("importance weight is NaN; check policy parameters")
    clipped = int(np.sum(np.abs(log_omega) > log_cap))
    return np.exp(np.clip(log_omega, -log_cap, log_cap)), clipped


def svrg_estimate(batch: TrajectoryBatch, policy, params_cur, params_ref,
                  mu_ref: np.ndarray, gamma: float, baseline: float = 0.0,
                  agent="collective", log_cap: float = DEFAULT_LOG_CAP) -> GradEstimate:
    """Variance-reduced estimate: anchor mean plus the importance-corrected
    difference of current and reference per-episode estimates.

    With identical current and reference parameters every correction term
    cancels exactly and the result equals ``mu_ref``.
    """
    if len(batch) == 0:
        raise ValueError("cannot estimate a gradient from an empty batch")
    weights = _step_weights(batch, gamma, baseline, agent)
    states, actions = batch.flat_steps()
    scale = 1.0 / len(batch)
    grad_cur = policy.weighted_score_sum(params_cur, states, actions,
                                         weights.ravel() * scale)
    omegas, clipped = batch_importance_weights(batch, policy, params_cur,
                                               params_ref, log_cap)
    ref_weights = weights * omegas[:, None]
    grad_ref = policy.weighted_score_sum(params_ref, states, actions,
                                         ref_weights.ravel() * scale)
    # group the correction first: identical current/reference parameters
    # cancel exactly, leaving the anchor untouched to the last bit
    correction = grad_cur - grad_ref
    return GradEstimate(gradient=np.asarray(mu_ref) + correction,
                        count=len(batch), clipped=clipped)
