"""Closed-form constants and convergence-regime checks.

Evaluates the step-size ceiling, minimum mini-batch sizes, contraction
rates, and the stationary-gap bound so experiments can be configured
inside the proven regime.  The grad/Hessian/variance constants are user
inputs: they depend on the environment and policy family and are not
estimated here.

Out-of-regime inputs are reported with a flag rather than rejected; real
experiment configurations routinely sit outside the provable regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProblemConstants:
    """User-supplied bound constants plus run and graph parameters.

    G: bound on the score-function norm
    F: bound on the log-policy Hessian norm
    V: bound on the gradient-estimator variance
    W: bound on the importance-weight variance
    L: smoothness constant of the objective
    L_g: Lipschitz constant of the per-episode estimator
    C_g: norm bound of the per-episode estimator
    """

    G: float
    F: float
    V: float
    W: float
    L: float
    L_g: float
    C_g: float
    horizon: int
    gamma: float
    n: int
    sigma: float
    S: int
    K: int
    M: int
    B: int
    alpha: float

    @property
    def c_omega(self) -> float:
        return weight_variance_coeff(self.G, self.F, self.W, self.horizon)

    @property
    def psi(self) -> float:
        return psi_coeff(self.C_g, self.c_omega, self.L_g)


def weight_variance_coeff(G: float, F: float, W: float, horizon: int) -> float:
    """Coefficient tying importance-weight variance to the squared distance
    between current and anchor parameters: H (2 H G^2 + F) (W + 1)."""
    return horizon * (2.0 * horizon * G * G + F) * (W + 1.0)


def psi_coeff(C_g: float, c_omega: float, L_g: float) -> float:
    """Combined estimator-drift coefficient: 2 (C_g^2 C_omega + L_g^2)."""
    return 2.0 * (C_g * C_g * c_omega + L_g * L_g)


@dataclass(frozen=True)
class RateReport:
    value: float
    in_regime: bool
    alpha_limit: float


def contraction_rate(sigma: float, alpha: float, psi: float) -> RateReport:
    """Joint consensus/tracking contraction rate
    (3 + sigma^2)/4 + 6 alpha sqrt(2 psi) / (1 - sigma^2).

    In regime (alpha below (1-sigma^2)^2 / (24 sqrt(2 psi))) the rate is
    strictly below 1.
    """
    lam = (3.0 + sigma ** 2) / 4.0 + 6.0 * alpha * math.sqrt(2.0 * psi) / (1.0 - sigma ** 2)
    limit = (1.0 - sigma ** 2) ** 2 / (24.0 * math.sqrt(2.0 * psi))
    return RateReport(value=lam, in_regime=alpha < limit, alpha_limit=limit)


@dataclass(frozen=True)
class StepSizeReport:
    alpha_max: float
    terms: tuple
    binding: int


def max_step_size(sigma: float, psi: float, K: int, L: float) -> StepSizeReport:
    """Three-way step-size ceiling; reports which term binds."""
    gap = 1.0 - sigma ** 2
    poly = gap * gap + 24.0 * gap
    t1 = gap * gap / (24.0 * (4.0 * psi * K * K * L * poly) ** (1.0 / 3.0))
    t2 = gap * gap / (96.0 * math.sqrt(3.0 * psi * K))
    t3 = 1.0 / (2.0 * L)
    terms = (t1, t2, t3)
    binding = int(np.argmin(terms))
    return StepSizeReport(alpha_max=min(terms), terms=terms, binding=binding)


@dataclass(frozen=True)
class MinibatchReport:
    b1: float
    b2: float
    b_refined: float
    b_required: int
    in_regime: bool


def min_minibatch(alpha: float, sigma: float, psi: float, K: int, n: int,
                  L: float) -> MinibatchReport:
    """Minimum mini-batch sizes; the refined value dominates both raw bounds
    when the step size is small enough."""
    gap = 1.0 - sigma ** 2
    poly = gap * gap + 24.0 * gap
    b1 = 54.0 * alpha * psi * K * K / (n * L)
    denom2 = n * L * gap ** 6 / 4608.0 - 12.0 * alpha ** 3 * psi * K * K * n * L * L * poly
    in_regime = denom2 > 0.0
    b2 = 36.0 * alpha ** 3 * psi * psi * K * K * poly / denom2 if in_regime else math.inf
    denom_ref = n * L - 55296.0 * alpha ** 3 * psi * K * K * L * L * n * poly / gap ** 6
    b_ref = 54.0 * alpha * psi * K * K / denom_ref if denom_ref > 0.0 else math.inf
    required = math.ceil(max(b1, b2, 1.0)) if in_regime else 0
    return MinibatchReport(b1=b1, b2=b2, b_refined=b_ref,
                           b_required=required, in_regime=in_regime)


def error_recursion_matrix(sigma: float, alpha: float, psi: float):
    """2x2 matrix coupling consensus and tracking errors across iterations,
    with its closed-form eigenvalues.

    Returns (matrix, lam1, lam2) with lam1 <= lam2.
    """
    gap = 1.0 - sigma ** 2
    g = np.array([
        [(1.0 + sigma ** 2) / 2.0, 2.0 * alpha ** 2 / gap],
        [36.0 * psi / gap, (3.0 + sigma ** 2) / 4.0],
    ])
    root = math.sqrt(gap ** 4 + 4608.0 * alpha ** 2 * psi)
    lam1 = (5.0 + 3.0 * sigma ** 2) / 8.0 - root / (8.0 * gap)
    lam2 = (5.0 + 3.0 * sigma ** 2) / 8.0 + root / (8.0 * gap)
    return g, lam1, lam2


@dataclass(frozen=True)
class ComplexityReport:
    trajectories_per_agent: int
    rounds_per_agent: tuple
    total_messages: int


def complexity(S: int, K: int, M: int, B: int, neighbor_counts) -> ComplexityReport:
    """Sample and communication cost of a full run.

    Each agent consumes S*M anchor episodes plus S*K*B inner episodes; each
    inner iteration exchanges the parameter and tracker vectors with every
    neighbor.
    """
    if min(S, K, M, B) < 1:
        raise ValueError("all loop sizes must be >= 1")
    counts = tuple(int(c) for c in neighbor_counts)
    edges = sum(counts) // 2
    return ComplexityReport(
        trajectories_per_agent=S * M + S * K * B,
        rounds_per_agent=tuple(K * S * c for c in counts),
        total_messages=K * S * 2 * edges,
    )


@dataclass(frozen=True)
class GapBoundReport:
    opt_term: float
    variance_term: float
    consensus_term: float
    tracking_term: float
    total: float
    v1: float
    v2: float
    in_regime: bool


def error_weights(c: ProblemConstants):
    """The two initial-error weights of the stationary-gap bound.

    Returns (v1, v2, denominator); both weights are positive inside the
    step-size regime.
    """
    psi = c.psi
    gap = 1.0 - c.sigma ** 2
    denom = gap ** 4 / 64.0 - 48.0 * c.alpha ** 2 * psi * c.K
    common = c.L ** 2 + 3.0 * psi / (c.B * c.n)
    v1 = (1536.0 * c.alpha ** 2 * psi * c.K * common / gap ** 2
          * (3.0 / c.K + (17.0 - c.sigma ** 2) / 4.0
             - 9216.0 * c.alpha ** 2 * psi / gap ** 4)) / denom
    v1 += (common * gap ** 2 + 3.0 * c.alpha * c.K / (c.B * c.n)) / denom
    v2 = (3.0 * psi * c.K * gap / (c.B * c.n)
          + 16.0 * common * (3.0 + 384.0 * c.alpha ** 2 * psi * c.K / gap ** 3)) / denom
    return v1, v2, denom


def stationary_gap_bound(c: ProblemConstants, j_gap: float,
                         init_consensus_err: float = 0.0,
                         init_tracking_err: float = 0.0) -> GapBoundReport:
    """Bound on the expected squared gradient norm at the uniformly drawn
    output, split into its four terms.

    j_gap bounds the objective headroom between the maximizer and the
    initial average iterate.
    """
    v1, v2, denom = error_weights(c)
    step = max_step_size(c.sigma, c.psi, c.K, c.L)
    mb = min_minibatch(c.alpha, c.sigma, c.psi, c.K, c.n, c.L)
    in_regime = (c.alpha < step.alpha_max and denom > 0.0 and mb.in_regime
                 and c.B >= max(mb.b1, mb.b2))

    iters = c.K * c.S
    opt_term = 2.0 * j_gap / (c.alpha * iters)
    variance_term = 2.0 * c.V / (c.M * c.n)
    consensus_term = 2.0 * v1 / (c.n * iters) * init_consensus_err
    tracking_term = 2.0 * c.alpha ** 2 * v2 / (c.n * iters) * init_tracking_err
    return GapBoundReport(
        opt_term=opt_term,
        variance_term=variance_term,
        consensus_term=consensus_term,
        tracking_term=tracking_term,
        total=opt_term + variance_term + consensus_term + tracking_term,
        v1=v1, v2=v2, in_regime=in_regime,
    )
