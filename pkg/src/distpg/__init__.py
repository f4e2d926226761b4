"""Decentralized policy-gradient simulator.

Cooperative agents over a communication graph maximize the sum of their
local expected returns by mixing parameter copies through a doubly
stochastic matrix while tracking the network-average of variance-reduced
gradient estimates.
"""

from ._backend import compiled_available, resolve as resolve_backend
from .config import ExperimentConfig, load_config, parse_config
from .envs import (MountainCarEnv, TabularMDP, enumerate_trajectories,
                   make_parity_mdp, make_timing_mdp)
from .estimators import gpomdp, importance_weight, outer_estimate, svrg_estimate
from .graphs import (MixingMatrix, Topology, build_topology, metropolis_weights,
                     spectral_gap, validate_doubly_stochastic)
from .optimizer import (AlgoConfig, RunResult, run, run_baseline_d_gpomdp,
                        run_baseline_dgt_gpomdp)
from .oracle import EnumeratedMdp, exact_gradient, exact_return
from .policies import GaussianMlpPolicy, TabularSoftmaxPolicy, finite_diff_check
from .trajectories import Trajectory, TrajectoryBatch, sample_trajectories

__version__ = "0.1.0"

__all__ = [
    "AlgoConfig", "EnumeratedMdp", "ExperimentConfig", "GaussianMlpPolicy",
    "MixingMatrix", "MountainCarEnv", "RunResult", "TabularMDP",
    "TabularSoftmaxPolicy", "Topology", "Trajectory", "TrajectoryBatch",
    "build_topology", "compiled_available", "enumerate_trajectories",
    "exact_gradient", "exact_return", "finite_diff_check", "gpomdp",
    "importance_weight", "load_config", "make_parity_mdp", "make_timing_mdp",
    "metropolis_weights", "outer_estimate", "parse_config", "resolve_backend",
    "run", "run_baseline_d_gpomdp", "run_baseline_dgt_gpomdp",
    "sample_trajectories", "spectral_gap", "svrg_estimate",
    "validate_doubly_stochastic",
]
