"""Streaming statistics over field samples, sample allocation, stopping rules.

Fields are always reduced on the level-0 grid so telescoping sums cancel
exactly; scalar variances are the integrated pointwise variances
sum_i var_i * dx0 and correction magnitudes use the discrete L2 norm on the
same grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .levels import FieldSolution, pair_cost, restrict_field
from .random_inputs import SampleKey


class FieldStats:
    """One-pass (Welford) mean/variance accumulator over vector-valued samples.

    Supports associative merge so concurrent partials combine to exactly the
    stats of the concatenated stream (up to round-off).
    """

    __slots__ = ("n", "mean", "m2", "cost_total")

    def __init__(self, n_cells: Optional[int] = None):
        self.n = 0
        self.mean = np.zeros(n_cells) if n_cells is not None else None
        self.m2 = np.zeros(n_cells) if n_cells is not None else None
        self.cost_total = 0.0

    def accumulate(self, sample: np.ndarray, cost: float = 0.0) -> "FieldStats":
        sample = np.asarray(sample, dtype=np.float64)
        if self.mean is None:
            self.mean = np.zeros_like(sample)
            self.m2 = np.zeros_like(sample)
        if sample.shape != self.mean.shape:
            raise ValueError(f"sample shape {sample.shape} != stats shape {self.mean.shape}")
        self.n += 1
        delta = sample - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (sample - self.mean)
        self.cost_total += cost
        return self

    def merge(self, other: "FieldStats") -> "FieldStats":
        """Fold another accumulator into this one (Chan's parallel update)."""
        if other.n == 0:
            return self
        if self.n == 0:
            self.n = other.n
            self.mean = other.mean.copy()
            self.m2 = other.m2.copy()
            self.cost_total += other.cost_total
            return self
        n_tot = self.n + other.n
        delta = other.mean - self.mean
        self.m2 = self.m2 + other.m2 + delta**2 * (self.n * other.n / n_tot)
        self.mean = self.mean + delta * (other.n / n_tot)
        self.n = n_tot
        self.cost_total += other.cost_total
        return self

    @property
    def variance_field(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.mean) if self.mean is not None else np.zeros(0)
        return self.m2 / (self.n - 1)

    def scalar_variance(self, dx: float) -> float:
        """Integrated pointwise variance sum_i var_i * dx."""
        if self.n < 2:
            return 0.0
        return float(np.sum(self.variance_field) * dx)

    def mean_norm(self, dx: float) -> float:
        """Discrete L2 norm of the running mean field."""
        if self.mean is None:
            return 0.0
        return float(np.sqrt(np.sum(self.mean**2) * dx))


def accumulate(stats: FieldStats, sample_field: np.ndarray, sample_cost: float) -> FieldStats:
    return stats.accumulate(sample_field, sample_cost)


@dataclass
class LevelStats:
    """Per-level sample statistics: corrections Y_l and fine solutions P_l."""

    level_index: int
    unit_cost: float
    stats_correction: FieldStats = field(default_factory=FieldStats)
    stats_solution: FieldStats = field(default_factory=FieldStats)

    def scalar_variance_correction(self, dx: float) -> float:
        return self.stats_correction.scalar_variance(dx)

    def scalar_variance_solution(self, dx: float) -> float:
        return self.stats_solution.scalar_variance(dx)


@dataclass
class AllocationPlan:
    """Sample counts from the constrained-optimal (Lagrange) allocation."""

    mu: float
    n_per_level: np.ndarray


def optimal_allocation(variances: Sequence[float], costs: Sequence[float], delta: float,
                       zero_variance_floor: int = 500) -> AllocationPlan:
    """N_l = ceil(mu * sqrt(V_l/C_l)) with mu = 2 delta^-2 sum_j sqrt(V_j C_j).

    Ensures the estimator variance budget sum_l V_l/N_l <= delta^2/2. Levels
    with zero estimated variance get the configured floor instead of a
    division by zero.
    """
    v = np.asarray(variances, dtype=np.float64)
    c = np.asarray(costs, dtype=np.float64)
    if v.size == 0:
        raise ValueError("need at least one level")
    if delta <= 0 or np.any(c <= 0) or np.any(v < 0):
        raise ValueError("delta and costs must be positive, variances nonnegative")
    mu = 2.0 * delta**-2 * float(np.sum(np.sqrt(v * c)))
    n = np.empty(v.size, dtype=np.int64)
    for l in range(v.size):
        if v[l] == 0.0:
            n[l] = zero_variance_floor
        else:
            n[l] = math.ceil(mu * math.sqrt(v[l] / c[l]) - 1e-12)
    return AllocationPlan(mu=mu, n_per_level=np.maximum(n, 1))


def mc_allocation(solution_variance: float, delta: float, zero_variance_floor: int = 500) -> int:
    """Plain Monte Carlo count N = ceil(2 delta^-2 V) so that V/N <= delta^2/2."""
    if delta <= 0 or solution_variance < 0:
        raise ValueError("delta must be positive, variance nonnegative")
    if solution_variance == 0.0:
        return zero_variance_floor
    return max(1, math.ceil(2.0 * delta**-2 * solution_variance - 1e-12))


def stopping_threshold(gamma: int, alpha: float, delta: float) -> float:
    return (gamma**alpha - 1.0) / math.sqrt(2.0) * delta


def stopping_mlmc(mean_correction_field: np.ndarray, dx0: float, gamma: int, alpha: float,
                  delta: float, noise_var: float = 0.0) -> bool:
    """Accept the current finest level when ||Y_hat_l||_L2 <= (Gamma^alpha - 1) delta / sqrt(2).

    noise_var is the integrated sampling variance of the mean estimator
    (V_hat/N); subtracting it debiases ||Y_hat||^2 as an estimate of the
    squared bias norm. With the default 0 this is the raw a-posteriori rule,
    but at the allocated sample counts the raw statistic's noise floor alone
    can exceed the threshold, so the drivers always pass the correction.
    """
    sq = float(np.sum(np.asarray(mean_correction_field) ** 2) * dx0) - noise_var
    return max(sq, 0.0) <= stopping_threshold(gamma, alpha, delta) ** 2


def stopping_mc(mean_l: np.ndarray, mean_lminus1: np.ndarray, dx0: float, gamma: int,
                alpha: float, delta: float, noise_var: float = 0.0) -> bool:
    """Same a-posteriori rule on the difference of consecutive level means.

    noise_var here is the summed sampling variance of both level means; for
    Gamma = 2, alpha = 1 the raw statistic satisfies E||diff||^2 >= delta^2 >
    threshold^2 once both levels are allocated to the delta^2/2 budget, so the
    raw rule can never fire and the debiased form is the usable one.
    """
    diff = np.asarray(mean_l) - np.asarray(mean_lminus1)
    sq = float(np.sum(diff**2) * dx0) - noise_var
    return max(sq, 0.0) <= stopping_threshold(gamma, alpha, delta) ** 2


def solution_sample(case, level_index: int, sample_id: int, master_seed: int) -> np.ndarray:
    """QoI field of one independent level solve, restricted to the level-0 grid."""
    sol = case.solution_sample(level_index, sample_id, master_seed)
    gamma = case.hierarchy.gamma
    return restrict_field(sol, 0, gamma).get(case.qoi_name)


def correction_sample(case, level_index: int, sample_id: int, master_seed: int) -> np.ndarray:
    """One MLMC correction sample on the level-0 grid.

    Level 0: the restricted solution itself. Level l >= 1: difference of the
    coupled fine/coarse pair, both restricted to level 0 before subtracting.
    """
    gamma = case.hierarchy.gamma
    if level_index == 0:
        return solution_sample(case, 0, sample_id, master_seed)
    fine, coarse = case.coupled_pair(level_index, sample_id, master_seed)
    f0 = restrict_field(fine, 0, gamma).get(case.qoi_name)
    c0 = restrict_field(coarse, 0, gamma).get(case.qoi_name)
    return f0 - c0


def correction_pair_fields(case, level_index: int, sample_id: int, master_seed: int):
    """(correction, fine solution) on the level-0 grid, sharing one pair evaluation."""
    gamma = case.hierarchy.gamma
    if level_index == 0:
        f = solution_sample(case, 0, sample_id, master_seed)
        return f, f
    fine, coarse = case.coupled_pair(level_index, sample_id, master_seed)
    f0 = restrict_field(fine, 0, gamma).get(case.qoi_name)
    c0 = restrict_field(coarse, 0, gamma).get(case.qoi_name)
    return f0 - c0, f0
