"""Decentralized stochastic policy optimization over a mixing matrix.

Three variants share the consensus machinery:

* ``dgt_svrpg`` — epoch-anchored variance-reduced estimates fed through a
  gradient tracker (the main algorithm).
* ``dgt_gpomdp`` — gradient tracking with fresh batch estimates, no
  variance reduction.
* ``d_gpomdp`` — consensus averaging plus a local fresh estimate, no
  tracker (decentralized SGD style).

Every run checks two structural facts each iteration: the tracker average
equals the estimate average (telescoping), and the consensus error
contracts at the rate dictated by the mixing matrix's spectral norm.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import estimators
from .graphs import MixingMatrix
from .oracle import EnumeratedMdp
from .policies import TabularSoftmaxPolicy
from .trajectories import sample_trajectories

VARIANTS = ("dgt_svrpg", "d_gpomdp", "dgt_gpomdp")

CONTRACTION_SLACK = 1e-9


@dataclass
class AlgoConfig:
    epochs: int = 10                 # S
    epoch_len: int = 2               # K
    batch: int = 10                  # M
    minibatch: int = 5               # B
    alpha: float = 0.0025
    gamma: float = 0.999
    horizon: int = 100
    variant: str = "dgt_svrpg"
    adam: bool = False
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    baseline: float = 0.0
    iw_log_cap: float = 20.0
    hetero_init: bool = False
    oracle_gradients: bool = False
    eval_rollouts: int = 10
    eval_every: int = 1
    backend: str = "auto"

    def validate(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for name in ("epochs", "epoch_len", "batch", "minibatch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        # alpha = 0 is allowed as a mixing-only diagnostic mode
        if self.alpha < 0:
            raise ValueError("step size must be nonnegative")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        return self


@dataclass
class RunMetrics:
    """Per inner-iteration trace; row 0 is the freshly initialized state."""

    iters: np.ndarray
    trajectories: np.ndarray
    returns: np.ndarray
    consensus: np.ndarray
    tracking: np.ndarray
    gradnorm: np.ndarray


@dataclass
class RunResult:
    theta_out: np.ndarray
    metrics: RunMetrics
    info: dict


class AdamState:
    """Per-agent first/second moment scaling with bias correction."""

    def __init__(self, dim: int):
        self.m = np.zeros(dim)
        self.u = np.zeros(dim)
        self.t = 0

    def scale(self, grad: np.ndarray, alpha: float, beta1: float, beta2: float,
              eps: float) -> np.ndarray:
        self.t += 1
        self.m = beta1 * self.m + (1.0 - beta1) * grad
        self.u = beta2 * self.u + (1.0 - beta2) * grad * grad
        m_hat = self.m / (1.0 - beta1 ** self.t)
        u_hat = self.u / (1.0 - beta2 ** self.t)
        return alpha * m_hat / (np.sqrt(u_hat) + eps)


def adam_scale(grad: np.ndarray, state: AdamState, alpha: float,
               beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> np.ndarray:
    return state.scale(np.asarray(grad, dtype=float), alpha, beta1, beta2, eps)


@dataclass
class RunState:
    config: AlgoConfig
    mixing: MixingMatrix
    env: object
    policy: object
    params: np.ndarray                    # (n, d) local copies
    agent_rngs: list
    eval_rng: np.random.Generator
    select_rng: np.random.Generator
    enum: EnumeratedMdp | None = None
    tracker: np.ndarray | None = None     # (n, d) or None for d_gpomdp
    grad_est: np.ndarray | None = None    # (n, d) latest per-agent estimate
    ref_params: np.ndarray | None = None  # (n, d) epoch anchors
    ref_grad: np.ndarray | None = None    # (n, d) anchor estimates
    epoch: int = 0
    inner_iter: int = 0
    trajectories: int = 0                 # per-agent training episodes consumed
    iw_clipped: int = 0
    contraction_violation: float = -np.inf
    tracking_gap_max: float = 0.0
    ref_ready: bool = False
    adam_states: list = field(default_factory=list)

    @property
    def n_agents(self) -> int:
        return self.mixing.n

    def count_trajectories(self, agent: int, count: int):
        # per-agent counter; every agent consumes the same budget, so only
        # agent 0 increments it
        if agent == 0:
            self.trajectories += count

    def consensus_error(self) -> float:
        dev = self.params - self.params.mean(axis=0)
        return float(np.sum(dev * dev))

    def tracking_error(self) -> float:
        if self.tracker is None:
            return float("nan")
        dev = self.tracker - self.tracker.mean(axis=0)
        return float(np.sum(dev * dev))

    def tracking_identity_gap(self) -> float:
        """| tracker average minus estimate average |, preserved by telescoping."""
        if self.tracker is None:
            return 0.0
        return float(np.max(np.abs(self.tracker.mean(axis=0) - self.grad_est.mean(axis=0))))


def _make_streams(seed: int, n_agents: int):
    children = np.random.SeedSequence(seed).spawn(n_agents + 3)
    agent_rngs = [np.random.default_rng(c) for c in children[:n_agents]]
    eval_rng = np.random.default_rng(children[n_agents])
    init_rng = np.random.default_rng(children[n_agents + 1])
    select_rng = np.random.default_rng(children[n_agents + 2])
    return agent_rngs, eval_rng, init_rng, select_rng


def _estimate_at(run: RunState, agent: int, params: np.ndarray, count: int) -> np.ndarray:
    """Fresh batch estimate of the agent's local gradient at given parameters."""
    cfg = run.config
    if cfg.oracle_gradients:
        return run.enum.gradient(run.policy, params, agent=agent)
    batch = sample_trajectories(run.env, run.policy, params, count, cfg.horizon,
                                run.agent_rngs[agent], backend=cfg.backend)
    run.count_trajectories(agent, count)
    return estimators.gpomdp(batch, run.policy, params, cfg.gamma,
                             baseline=cfg.baseline, agent=agent).gradient


def _svrg_at(run: RunState, agent: int) -> np.ndarray:
    cfg = run.config
    if cfg.oracle_gradients:
        return run.enum.gradient(run.policy, run.params[agent], agent=agent)
    batch = sample_trajectories(run.env, run.policy, run.params[agent], cfg.minibatch,
                                cfg.horizon, run.agent_rngs[agent], backend=cfg.backend)
    run.count_trajectories(agent, cfg.minibatch)
    est = estimators.svrg_estimate(batch, run.policy, run.params[agent],
                                   run.ref_params[agent], run.ref_grad[agent],
                                   cfg.gamma, baseline=cfg.baseline, agent=agent,
                                   log_cap=cfg.iw_log_cap)
    run.iw_clipped += est.clipped
    return est.gradient


def init_run(config: AlgoConfig, mixing: MixingMatrix, env, policy, seed: int) -> RunState:
    """Initialize local copies, anchors, and the tracking variables.

    All agents start from one shared parameter draw unless ``hetero_init``
    is set.  Tracking variants set tracker = estimate = the epoch-0 anchor
    gradient (exact in oracle mode, an M-episode estimate otherwise); the
    anchor is reused by the first epoch so nothing is sampled twice.
    """
    config.validate()
    n = mixing.n
    if env.n_agents != n:
        raise ValueError(f"environment has {env.n_agents} agents but graph has {n} nodes")
    if policy.n_agents != n:
        raise ValueError(f"policy has {policy.n_agents} agents but graph has {n} nodes")
    env_dim = getattr(env, "state_dim", None)
    policy_dim = getattr(policy, "state_dim", None)
    if env_dim is not None and policy_dim is not None and env_dim != policy_dim:
        raise ValueError(f"policy expects state dimension {policy_dim}, "
                         f"environment provides {env_dim}")
    agent_rngs, eval_rng, init_rng, select_rng = _make_streams(seed, n)

    if config.hetero_init:
        params = np.stack([policy.init_params(init_rng) for _ in range(n)])
    else:
        params = np.tile(policy.init_params(init_rng), (n, 1))

    enum = None
    if isinstance(policy, TabularSoftmaxPolicy) and hasattr(env, "transitions"):
        try:
            enum = EnumeratedMdp(env, config.horizon, config.gamma)
        except ValueError:
            enum = None
    if config.oracle_gradients and enum is None:
        raise ValueError("oracle gradients need an enumerable tabular environment and policy")

    run_state = RunState(config=config, mixing=mixing, env=env, policy=policy,
                         params=params, agent_rngs=agent_rngs, eval_rng=eval_rng,
                         select_rng=select_rng, enum=enum)
    run_state.adam_states = [AdamState(policy.dim) for _ in range(n)]

    if config.variant in ("dgt_svrpg", "dgt_gpomdp"):
        run_state.ref_params = params.copy()
        est = np.stack([_estimate_at(run_state, i, run_state.ref_params[i], config.batch)
                        for i in range(n)])
        run_state.ref_grad = est
        run_state.grad_est = est.copy()
        run_state.tracker = est.copy()
        run_state.ref_ready = True
    return run_state


def _directions(run: RunState, grads: np.ndarray) -> np.ndarray:
    cfg = run.config
    if not cfg.adam:
        return cfg.alpha * grads
    return np.stack([
        run.adam_states[i].scale(grads[i], cfg.alpha, cfg.adam_beta1,
                                 cfg.adam_beta2, cfg.adam_eps)
        for i in range(run.n_agents)
    ])


def _mix_params(run: RunState, directions: np.ndarray):
    """One consensus round with additive directions, plus the per-sample
    contraction check derived from the mixing matrix's spectral norm."""
    sigma2 = run.mixing.sigma ** 2
    before = run.params - run.params.mean(axis=0)
    bound = 0.5 * (1.0 + sigma2) * float(np.sum(before * before))
    d_dev = directions - directions.mean(axis=0)
    bound += 2.0 / (1.0 - sigma2) * float(np.sum(d_dev * d_dev))
    run.params = run.mixing.w @ run.params + directions
    after = run.params - run.params.mean(axis=0)
    lhs = float(np.sum(after * after))
    run.contraction_violation = max(run.contraction_violation, lhs - bound)
    if lhs > bound + CONTRACTION_SLACK:
        raise AssertionError(
            f"consensus contraction violated: {lhs} > {bound} + {CONTRACTION_SLACK}")


def consensus_param_step(run: RunState, alpha: float):
    """Constant-step consensus update: params <- W params + alpha * tracker."""
    _mix_params(run, alpha * run.tracker)


def tracker_step(run: RunState, new_est: np.ndarray):
    """Tracker update: tracker <- W tracker + (new - previous) estimate.

    Preserves tracker-average == estimate-average exactly (telescoping from
    the equal initialization).
    """
    run.tracker = run.mixing.w @ run.tracker + new_est - run.grad_est
    run.grad_est = new_est
    run.tracking_gap_max = max(run.tracking_gap_max, run.tracking_identity_gap())


def run_epoch(run: RunState, on_iteration=None):
    """One anchor refresh plus epoch_len inner iterations of the main variant."""
    cfg = run.config
    if run.ref_ready:
        run.ref_ready = False
    else:
        run.ref_params = run.params.copy()
        if not cfg.oracle_gradients:
            run.ref_grad = np.stack([
                _estimate_at(run, i, run.ref_params[i], cfg.batch)
                for i in range(run.n_agents)
            ])
    for _ in range(cfg.epoch_len):
        if on_iteration is not None:
            on_iteration(run, before_update=True)
        _mix_params(run, _directions(run, run.tracker))
        new_est = np.stack([_svrg_at(run, i) for i in range(run.n_agents)])
        tracker_step(run, new_est)
        run.inner_iter += 1
        if on_iteration is not None:
            on_iteration(run, before_update=False)
    run.epoch += 1


def _dgt_gpomdp_iteration(run: RunState):
    cfg = run.config
    _mix_params(run, _directions(run, run.tracker))
    new_est = np.stack([
        _estimate_at(run, i, run.params[i], cfg.batch)
        for i in range(run.n_agents)
    ])
    tracker_step(run, new_est)
    run.inner_iter += 1


def _d_gpomdp_iteration(run: RunState):
    cfg = run.config
    grads = np.stack([
        _estimate_at(run, i, run.params[i], cfg.batch)
        for i in range(run.n_agents)
    ])
    _mix_params(run, _directions(run, grads))
    run.inner_iter += 1


class _Recorder:
    """Collects the per-iteration metric trace during a run."""

    def __init__(self, run_state: RunState):
        self.run = run_state
        self.rows = []
        self.last_eval = None
        self.total_iters = run_state.config.epochs * run_state.config.epoch_len

    def _evaluate(self):
        run_state, cfg = self.run, self.run.config
        mean_params = run_state.params.mean(axis=0)
        batch = sample_trajectories(run_state.env, run_state.policy, mean_params,
                                    cfg.eval_rollouts, cfg.horizon,
                                    run_state.eval_rng, backend=cfg.backend)
        disc = cfg.gamma ** np.arange(cfg.horizon)
        ret = float((batch.rewards.sum(axis=2) * disc).sum(axis=1).mean())
        if run_state.enum is not None:
            grad = run_state.enum.gradient(run_state.policy, mean_params, agent="collective")
        else:
            grad = estimators.gpomdp(batch, run_state.policy, mean_params, cfg.gamma,
                                     baseline=cfg.baseline, agent="collective").gradient
        return ret, float(grad @ grad)

    def record(self):
        run_state, cfg = self.run, self.run.config
        t = run_state.inner_iter
        if self.last_eval is None or t % cfg.eval_every == 0 or t == self.total_iters:
            self.last_eval = self._evaluate()
        ret, gradnorm = self.last_eval
        self.rows.append((t, run_state.trajectories, ret, run_state.consensus_error(),
                          run_state.tracking_error(), gradnorm))

    def metrics(self) -> RunMetrics:
        arr = np.array(self.rows)
        return RunMetrics(iters=arr[:, 0].astype(int),
                          trajectories=arr[:, 1].astype(int),
                          returns=arr[:, 2], consensus=arr[:, 3],
                          tracking=arr[:, 4], gradnorm=arr[:, 5])


def run(config: AlgoConfig, mixing: MixingMatrix, env, policy, seed: int = 0) -> RunResult:
    """Execute the configured variant for epochs * epoch_len inner iterations.

    The returned parameters are a uniformly drawn inner iterate (one shared
    index across agents) for the main variant, and the final iterate for
    the two baselines.
    """
    config.validate()
    run_state = init_run(config, mixing, env, policy, seed)
    total = config.epochs * config.epoch_len
    recorder = _Recorder(run_state)
    recorder.record()

    theta_out = None
    if config.variant == "dgt_svrpg":
        out_iter = int(run_state.select_rng.integers(total))

        def on_iteration(rs: RunState, before_update: bool):
            nonlocal theta_out
            if before_update:
                if rs.inner_iter == out_iter:
                    theta_out = rs.params.copy()
            else:
                recorder.record()

        for _ in range(config.epochs):
            run_epoch(run_state, on_iteration)
    else:
        out_iter = None
        step = (_d_gpomdp_iteration if config.variant == "d_gpomdp"
                else _dgt_gpomdp_iteration)
        for _ in range(total):
            step(run_state)
            recorder.record()
        theta_out = run_state.params.copy()

    info = {
        "trajectories": run_state.trajectories,
        "iw_clipped": run_state.iw_clipped,
        "contraction_violation": run_state.contraction_violation,
        "tracking_gap_max": run_state.tracking_gap_max,
        "output_iter": out_iter,
    }
    return RunResult(theta_out=theta_out, metrics=recorder.metrics(), info=info)


def run_baseline_d_gpomdp(config: AlgoConfig, mixing, env, policy, seed: int = 0) -> RunResult:
    return run(dataclasses.replace(config, variant="d_gpomdp"), mixing, env, policy, seed)


def run_baseline_dgt_gpomdp(config: AlgoConfig, mixing, env, policy, seed: int = 0) -> RunResult:
    return run(dataclasses.replace(config, variant="dgt_gpomdp"), mixing, env, policy, seed)
