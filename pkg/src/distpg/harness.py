"""Experiment orchestration: seeded repetitions, CSV/SVG emission, variant
comparison, regime reports, and the exact-gradient self-check.

A repetition r runs with seed = base seed + r and is fully determined by
the configuration, so repetitions can run in any order on any number of
workers and still produce bit-identical files.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
from dataclasses import dataclass, fields

import numpy as np

from . import bounds, estimators, oracle, optimizer
from .config import ConfigError, ExperimentConfig, format_config, goal_position_list
from .envs import (MountainCarEnv, TabularMDP, enumerate_trajectories,
                   make_parity_mdp, make_timing_mdp)
from .graphs import build_topology, metropolis_weights, parse_edge_list
from .policies import GaussianMlpPolicy, TabularSoftmaxPolicy
from .trajectories import sample_trajectories

CSV_HEADER = "iter,trajectories,return_mean,consensus_err,tracking_err,gradnorm"
SUMMARY_HEADER = ("iter,trajectories,return_mean,return_std,consensus_mean,consensus_std,"
                  "tracking_mean,tracking_std,gradnorm_mean,gradnorm_std")
FINAL_WINDOW_FRACTION = 0.25


def build_components(cfg: ExperimentConfig):
    """Instantiate (mixing, env, policy, algo config) from a parsed config."""
    edges = parse_edge_list(cfg.edges) if cfg.graph == "custom" else None
    topo = build_topology(cfg.graph, cfg.agents, edges)
    mixing = metropolis_weights(topo)

    if cfg.env == "mountaincar":
        env = MountainCarEnv(cfg.agents, goal_position_list(cfg))
        policy = GaussianMlpPolicy(cfg.agents, env.state_dim,
                                   hidden=cfg.hidden, sigma=cfg.policy_sigma)
    else:
        if cfg.tabular_file in ("builtin", "builtin:parity"):
            env = make_parity_mdp(cfg.agents, gamma=cfg.gamma, horizon=cfg.horizon)
        elif cfg.tabular_file == "builtin:timing":
            env = make_timing_mdp(cfg.agents, gamma=cfg.gamma, horizon=cfg.horizon)
        else:
            env = TabularMDP.from_json(cfg.tabular_file, gamma=cfg.gamma, horizon=cfg.horizon)
        if env.n_agents != cfg.agents:
            raise ConfigError(f"tabular file defines {env.n_agents} agents, config says {cfg.agents}")
        if len(set(env.action_counts)) != 1:
            raise ConfigError("tabular softmax policy needs equal action counts per agent")
        policy = TabularSoftmaxPolicy(cfg.agents, env.n_states, env.action_counts[0])

    algo = optimizer.AlgoConfig(
        epochs=cfg.epochs_S, epoch_len=cfg.epoch_len_K, batch=cfg.batch_M,
        minibatch=cfg.minibatch_B, alpha=cfg.alpha, gamma=cfg.gamma,
        horizon=cfg.horizon, variant=cfg.variant, adam=cfg.adam,
        adam_beta1=cfg.adam_beta1, adam_beta2=cfg.adam_beta2, adam_eps=cfg.adam_eps,
        baseline=cfg.baseline_b, iw_log_cap=cfg.iw_log_cap,
        hetero_init=cfg.hetero_init, oracle_gradients=cfg.oracle_gradients,
        eval_rollouts=cfg.eval_rollouts, eval_every=cfg.eval_every,
        backend=cfg.backend,
    )
    return mixing, env, policy, algo


def run_repetition(cfg: ExperimentConfig, rep: int) -> optimizer.RunResult:
    mixing, env, policy, algo = build_components(cfg)
    return optimizer.run(algo, mixing, env, policy, seed=cfg.seed + rep)


def _metric_rows(metrics: optimizer.RunMetrics):
    for i in range(len(metrics.iters)):
        yield (int(metrics.iters[i]), int(metrics.trajectories[i]),
               float(metrics.returns[i]), float(metrics.consensus[i]),
               float(metrics.tracking[i]), float(metrics.gradnorm[i]))


def _write_metrics_csv(path, metrics: optimizer.RunMetrics):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for it, tr, ret, cons, track, grad in _metric_rows(metrics):
            fh.write(f"{it},{tr},{ret!r},{cons!r},{track!r},{grad!r}\n")


def _write_summary_csv(path, results):
    stacked = {
        "returns": np.stack([r.metrics.returns for r in results]),
        "consensus": np.stack([r.metrics.consensus for r in results]),
        "tracking": np.stack([r.metrics.tracking for r in results]),
        "gradnorm": np.stack([r.metrics.gradnorm for r in results]),
    }
    iters = results[0].metrics.iters
    trajectories = results[0].metrics.trajectories
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for i in range(len(iters)):
            cells = [str(int(iters[i])), str(int(trajectories[i]))]
            for key in ("returns", "consensus", "tracking", "gradnorm"):
                col = stacked[key][:, i]
                cells.append(repr(float(col.mean())))
                cells.append(repr(float(col.std())))
            fh.write(",".join(cells) + "\n")


def _run_rep_entry(cfg: ExperimentConfig, rep: int):
    # module-level entry point so process pools can pickle it
    result = run_repetition(cfg, rep)
    return rep, result


def _run_all_reps(cfg: ExperimentConfig, workers: int):
    reps = range(cfg.repetitions)
    if workers <= 1 or cfg.repetitions == 1:
        return [run_repetition(cfg, r) for r in reps]
    results = [None] * cfg.repetitions
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        for rep, result in pool.map(_run_rep_entry, [cfg] * cfg.repetitions, reps):
            results[rep] = result
    return results


def final_window_mean(returns: np.ndarray) -> float:
    window = max(1, int(math.ceil(len(returns) * FINAL_WINDOW_FRACTION)))
    return float(np.mean(returns[-window:]))


@dataclass
class ExperimentOutput:
    out_dir: str
    results: list
    files: list


def run_experiment(cfg: ExperimentConfig, out_dir: str = None, workers: int = 1) -> ExperimentOutput:
    """Run every repetition, then write per-repetition CSVs, the
    across-repetition summary, a chart, and a metadata echo.

    Partially written files are removed if any repetition fails.
    """
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        echo_path = os.path.join(out_dir, "effective_config.txt")
        with open(echo_path, "w", encoding="utf-8") as fh:
            fh.write(format_config(cfg))
        written.append(echo_path)

        results = _run_all_reps(cfg, workers)

        for rep, result in enumerate(results):
            path = os.path.join(out_dir, f"metrics_{rep}.csv")
            _write_metrics_csv(path, result.metrics)
            written.append(path)

        summary_path = os.path.join(out_dir, "summary.csv")
        _write_summary_csv(summary_path, results)
        written.append(summary_path)

        meta_path = os.path.join(out_dir, "meta.json")
        meta = {
            "variant": cfg.variant,
            "repetitions": cfg.repetitions,
            "base_seed": cfg.seed,
            "per_rep": [
                {"seed": cfg.seed + rep,
                 "trajectories": result.info["trajectories"],
                 "iw_clipped": result.info["iw_clipped"],
                 "contraction_violation": result.info["contraction_violation"],
                 "tracking_gap_max": result.info["tracking_gap_max"],
                 "output_iter": result.info["output_iter"],
                 "final_window_return": final_window_mean(result.metrics.returns)}
                for rep, result in enumerate(results)
            ],
        }
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(meta_path)

        svg_path = os.path.join(out_dir, "curves.svg")
        _write_run_chart(svg_path, cfg, results)
        written.append(svg_path)
        return ExperimentOutput(out_dir=out_dir, results=results, files=written)
    except Exception:
        for path in written:
            try:
                os.unlink(path)
            except OSError:
                pass
        raise


def _write_run_chart(path, cfg: ExperimentConfig, results):
    from .svgplot import Series, line_chart
    returns = np.stack([r.metrics.returns for r in results])
    mean = returns.mean(axis=0)
    std = returns.std(axis=0)
    x = results[0].metrics.trajectories.astype(float)
    line_chart(path, [Series(x=list(x), y=list(mean), label=cfg.variant,
                             band_lo=list(mean - std), band_hi=list(mean + std))],
               title=f"{cfg.variant} on {cfg.env} ({cfg.graph}, n={cfg.agents})",
               xlabel="trajectories per agent", ylabel="averaged global return")


_COMPARE_IGNORED = {"variant", "graph", "edges", "out_dir"}


def _comparable_key(cfg: ExperimentConfig):
    return tuple((f.name, getattr(cfg, f.name)) for f in fields(ExperimentConfig)
                 if f.name not in _COMPARE_IGNORED)


@dataclass
class ComparisonSummary:
    labels: list
    sigmas: dict
    final_returns: np.ndarray   # (configs, repetitions)
    win_counts: list
    files: list


def compare(cfgs, out_dir: str = "out", workers: int = 1) -> ComparisonSummary:
    """Run several configurations that differ only in variant/graph and
    tabulate per-seed final-window returns, win counts, and graph spectral
    norms."""
    if len(cfgs) < 1:
        raise ValueError("need at least one configuration to compare")
    base = _comparable_key(cfgs[0])
    for cfg in cfgs[1:]:
        if _comparable_key(cfg) != base:
            raise ValueError("configurations must differ only in variant/graph")
    labels = []
    for cfg in cfgs:
        label = f"{cfg.variant}-{cfg.graph}"
        while label in labels:
            label += "+"
        labels.append(label)

    os.makedirs(out_dir, exist_ok=True)
    all_results = []
    sigmas = {}
    for cfg, label in zip(cfgs, labels):
        mixing, _, _, _ = build_components(cfg)
        sigmas[label] = mixing.sigma
        out = run_experiment(cfg, out_dir=os.path.join(out_dir, label), workers=workers)
        all_results.append(out.results)

    reps = cfgs[0].repetitions
    final = np.array([[final_window_mean(res.metrics.returns) for res in results]
                      for results in all_results])
    wins = [0] * len(cfgs)
    for rep in range(reps):
        wins[int(np.argmax(final[:, rep]))] += 1

    files = []
    csv_path = os.path.join(out_dir, "comparison.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("label,variant,graph,sigma,seed,final_window_return\n")
        for ci, (cfg, label) in enumerate(zip(cfgs, labels)):
            for rep in range(reps):
                fh.write(f"{label},{cfg.variant},{cfg.graph},{sigmas[label]!r},"
                         f"{cfg.seed + rep},{final[ci, rep]!r}\n")
    files.append(csv_path)

    txt_path = os.path.join(out_dir, "comparison.txt")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write("final-window mean return per seed\n")
        fh.write(f"{'label':<28}{'sigma':>10}{'wins':>6}  per-seed returns\n")
        for ci, label in enumerate(labels):
            row = " ".join(f"{v:.3f}" for v in final[ci])
            fh.write(f"{label:<28}{sigmas[label]:>10.4f}{wins[ci]:>6}  {row}\n")
        fh.write(f"\nwin counts sum to repetitions = {reps}\n")
    files.append(txt_path)

    svg_path = os.path.join(out_dir, "comparison.svg")
    _write_compare_chart(svg_path, labels, all_results)
    files.append(svg_path)
    return ComparisonSummary(labels=labels, sigmas=sigmas, final_returns=final,
                             win_counts=wins, files=files)


def _write_compare_chart(path, labels, all_results):
    from .svgplot import Series, line_chart
    series = []
    for label, results in zip(labels, all_results):
        returns = np.stack([r.metrics.returns for r in results])
        mean = returns.mean(axis=0)
        std = returns.std(axis=0)
        x = list(results[0].metrics.trajectories.astype(float))
        series.append(Series(x=x, y=list(mean), label=label,
                             band_lo=list(mean - std), band_hi=list(mean + std)))
    line_chart(path, series, title="variant comparison",
               xlabel="trajectories per agent", ylabel="averaged global return")


CONSTANT_KEYS = ("G", "F", "V", "W", "L", "L_g", "C_g",
                 "j_gap", "init_consensus_err", "init_tracking_err")
CONSTANT_DEFAULTS = {"j_gap": 1.0, "init_consensus_err": 0.0, "init_tracking_err": 0.0}


def parse_constants(text: str) -> dict:
    """Parse the bound-constants file (same key = value format)."""
    values = dict(CONSTANT_DEFAULTS)
    required = set(CONSTANT_KEYS) - set(CONSTANT_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in CONSTANT_KEYS:
            raise ConfigError(f"unknown constant {key!r}", lineno)
        try:
            values[key] = float(value.strip())
        except ValueError:
            raise ConfigError(f"{key} expects a number, got {value.strip()!r}", lineno) from None
    missing = required - set(values)
    if missing:
        raise ConfigError(f"missing constants: {sorted(missing)}")
    for key in ("G", "F", "V", "L", "L_g", "C_g"):
        if values[key] <= 0:
            raise ConfigError(f"{key} must be positive")
    if values["W"] < 0:
        raise ConfigError("W must be nonnegative")
    return values


def bounds_report(cfg: ExperimentConfig, constants: dict):
    """Evaluate every closed-form quantity for the configured run; returns
    (text report, CSV row dict)."""
    mixing, _, _, _ = build_components(cfg)
    c = bounds.ProblemConstants(
        G=constants["G"], F=constants["F"], V=constants["V"], W=constants["W"],
        L=constants["L"], L_g=constants["L_g"], C_g=constants["C_g"],
        horizon=cfg.horizon, gamma=cfg.gamma, n=cfg.agents, sigma=mixing.sigma,
        S=cfg.epochs_S, K=cfg.epoch_len_K, M=cfg.batch_M, B=cfg.minibatch_B,
        alpha=cfg.alpha,
    )
    rate = bounds.contraction_rate(c.sigma, c.alpha, c.psi)
    step = bounds.max_step_size(c.sigma, c.psi, c.K, c.L)
    mb = bounds.min_minibatch(c.alpha, c.sigma, c.psi, c.K, c.n, c.L)
    _, lam1, lam2 = bounds.error_recursion_matrix(c.sigma, c.alpha, c.psi)
    edges = parse_edge_list(cfg.edges) if cfg.graph == "custom" else None
    topo = build_topology(cfg.graph, cfg.agents, edges)
    comp = bounds.complexity(c.S, c.K, c.M, c.B,
                             [topo.degree(i) for i in range(topo.n)])
    gap = bounds.stationary_gap_bound(c, constants["j_gap"],
                                      constants["init_consensus_err"],
                                      constants["init_tracking_err"])

    row = {
        "sigma": c.sigma,
        "c_omega": c.c_omega,
        "psi": c.psi,
        "lambda": rate.value,
        "lambda_in_regime": rate.in_regime,
        "alpha_max": step.alpha_max,
        "alpha_in_regime": c.alpha < step.alpha_max,
        "B1": mb.b1,
        "B2": mb.b2,
        "B_refined": mb.b_refined,
        "B_required": mb.b_required,
        "recursion_lam1": lam1,
        "recursion_lam2": lam2,
        "v1": gap.v1,
        "v2": gap.v2,
        "bound_opt_term": gap.opt_term,
        "bound_variance_term": gap.variance_term,
        "bound_consensus_term": gap.consensus_term,
        "bound_tracking_term": gap.tracking_term,
        "bound_total": gap.total,
        "in_regime": gap.in_regime,
        "trajectories_per_agent": comp.trajectories_per_agent,
        "total_messages": comp.total_messages,
    }

    lines = [
        f"graph {cfg.graph} with n={cfg.agents}: sigma = {c.sigma:.6g}",
        f"importance-weight variance coefficient = {c.c_omega:.6g}",
        f"combined drift coefficient psi = {c.psi:.6g}",
        f"contraction rate lambda = {rate.value:.6g} "
        f"({'in regime' if rate.in_regime else 'OUT OF REGIME'}, "
        f"alpha limit {rate.alpha_limit:.6g})",
        f"step-size ceiling = {step.alpha_max:.6g} (term {step.binding + 1} binds; "
        f"terms = {step.terms[0]:.6g}, {step.terms[1]:.6g}, {step.terms[2]:.6g})",
        f"configured alpha = {c.alpha:.6g} "
        f"({'in regime' if c.alpha < step.alpha_max else 'OUT OF REGIME'})",
        f"mini-batch bounds: B1 = {mb.b1:.6g}, B2 = {mb.b2:.6g}, "
        f"refined = {mb.b_refined:.6g}, required B >= {mb.b_required}",
        f"error-recursion eigenvalues = {lam1:.6g}, {lam2:.6g}",
        f"initial-error weights: v1 = {gap.v1:.6g}, v2 = {gap.v2:.6g}",
        "stationary-gap bound terms: "
        f"opt {gap.opt_term:.6g} + variance {gap.variance_term:.6g} + "
        f"consensus {gap.consensus_term:.6g} + tracking {gap.tracking_term:.6g} "
        f"= {gap.total:.6g}",
        f"overall {'IN REGIME' if gap.in_regime else 'OUT OF REGIME'}",
        f"sample cost: {comp.trajectories_per_agent} trajectories per agent; "
        f"rounds per agent = {list(comp.rounds_per_agent)}; "
        f"total messages = {comp.total_messages}",
    ]
    return "\n".join(lines) + "\n", row


def write_bounds_report(cfg: ExperimentConfig, constants: dict, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    text, row = bounds_report(cfg, constants)
    txt_path = os.path.join(out_dir, "bounds.txt")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    csv_path = os.path.join(out_dir, "bounds.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        keys = list(row)
        fh.write(",".join(keys) + "\n")
        fh.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k])
                          for k in keys) + "\n")
    return text, [txt_path, csv_path]


def oracle_check(cfg: ExperimentConfig, probes: int = 3) -> tuple:
    """Cross-check the enumeration oracle on the configured tabular problem.

    Verifies total probability mass, the exact gradient against central
    finite differences of the enumerated return, and Monte Carlo agreement
    of the batch estimator.  Returns (ok, report text).
    """
    if cfg.env != "tabular":
        raise ConfigError("oracle-check requires env = tabular")
    _, env, policy, _ = build_components(cfg)
    rng = np.random.default_rng(cfg.seed)
    lines = []
    ok = True

    enum = oracle.EnumeratedMdp(env, cfg.horizon, cfg.gamma)
    for probe in range(probes):
        params = rng.normal(0.0, 0.5, policy.dim)
        trajs = enumerate_trajectories(env, policy, params, cfg.horizon)
        mass = sum(p for _, p in trajs)
        mass_ok = abs(mass - 1.0) <= 1e-10
        ok &= mass_ok
        lines.append(f"probe {probe}: total probability mass = {mass:.12f} "
                     f"[{'ok' if mass_ok else 'FAIL'}]")

        grad = enum.gradient(policy, params, agent="collective")
        fd = np.empty_like(grad)
        h = 1e-6
        work = params.copy()
        for j in range(params.size):
            orig = work[j]
            work[j] = orig + h
            up = enum.expected_return(policy, work, agent="collective")
            work[j] = orig - h
            dn = enum.expected_return(policy, work, agent="collective")
            work[j] = orig
            fd[j] = (up - dn) / (2.0 * h)
        err = float(np.max(np.abs(grad - fd) / np.maximum(1.0, np.abs(grad))))
        grad_ok = err <= 1e-8
        ok &= grad_ok
        lines.append(f"probe {probe}: gradient vs finite differences, "
                     f"max relative error = {err:.3e} [{'ok' if grad_ok else 'FAIL'}]")

    params = rng.normal(0.0, 0.5, policy.dim)
    n_mc = 20000
    batch = sample_trajectories(env, policy, params, n_mc, cfg.horizon, rng)
    exact = enum.gradient(policy, params, agent=0)
    weights = estimators._step_weights(batch, cfg.gamma, 0.0, 0)
    states, actions = batch.flat_steps()
    per_traj = np.stack([
        policy.weighted_score_sum(params, states[i * cfg.horizon:(i + 1) * cfg.horizon],
                                  actions[i * cfg.horizon:(i + 1) * cfg.horizon],
                                  weights[i])
        for i in range(min(n_mc, 2000))
    ])
    mc_mean = per_traj.mean(axis=0)
    mc_se = per_traj.std(axis=0, ddof=1) / math.sqrt(per_traj.shape[0])
    z = np.abs(mc_mean - exact) / np.maximum(mc_se, 1e-12)
    mc_ok = bool(np.all(z <= 4.0))
    ok &= mc_ok
    lines.append(f"batch estimator vs oracle: max |z| = {float(z.max()):.2f} "
                 f"over {per_traj.shape[0]} episodes [{'ok' if mc_ok else 'FAIL'}]")
    lines.append("overall: " + ("PASS" if ok else "FAIL"))
    return bool(ok), "\n".join(lines) + "\n"
