"""Adaptive multilevel and plain Monte Carlo drivers with full cost ledgers.

Both drivers start every new level with n_initial pilot samples, re-estimate
variances from all accumulated samples, top up to the optimal allocation until
the delta^2/2 variance budget holds, and stop once the a-posteriori bias test
fires. Sample evaluation is chunked; chunk partial statistics merge in a fixed
order, so reports are bit-identical for any worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .estimators import (
    FieldStats,
    LevelStats,
    correction_pair_fields,
    mc_allocation,
    optimal_allocation,
    solution_sample,
    stopping_mc,
    stopping_mlmc,
)
from .levels import pair_cost, solution_cost
from .solvers import SolverFailure

CHUNK = 256
RETRY_OFFSET = 1 << 48


class RunAborted(RuntimeError):
    """A sample failed twice (original seed and retry seed)."""


@dataclass
class LevelReport:
    level_index: int
    n_samples: int
    variance: float
    unit_cost: float
    correction_norm: float
    solution_variance: float = float("nan")


@dataclass
class EstimatorReport:
    method: str
    delta: float
    finest_level: int
    converged: bool
    per_level: List[LevelReport]
    qoi_field: np.ndarray
    total_cost: float
    allocation_cost: float
    estimator_variance: float
    master_seed: int

    @property
    def budget_satisfied(self) -> bool:
        return self.estimator_variance <= self.delta**2 / 2.0 + 1e-12


def _eval_correction_chunk(case, level_index, ids, master_seed, unit_cost):
    corr = FieldStats()
    sol = FieldStats()
    for sid in ids:
        try:
            y, f = correction_pair_fields(case, level_index, sid, master_seed)
        except SolverFailure:
            try:
                y, f = correction_pair_fields(case, level_index, sid + RETRY_OFFSET, master_seed)
            except SolverFailure as exc:
                raise RunAborted(f"correction sample {level_index}/{sid} failed twice") from exc
        corr.accumulate(y, unit_cost)
        sol.accumulate(f)
    return corr, sol


def _eval_solution_chunk(case, level_index, ids, master_seed, unit_cost):
    sol = FieldStats()
    for sid in ids:
        try:
            f = solution_sample(case, level_index, sid, master_seed)
        except SolverFailure:
            try:
                f = solution_sample(case, level_index, sid + RETRY_OFFSET, master_seed)
            except SolverFailure as exc:
                raise RunAborted(f"solution sample {level_index}/{sid} failed twice") from exc
        sol.accumulate(f, unit_cost)
    return (sol,)


def _chunk_ranges(start: int, stop: int):
    return [range(s, min(s + CHUNK, stop)) for s in range(start, stop, CHUNK)]


def _run_chunks(fn, case, level_index, start, stop, master_seed, unit_cost, pool):
    """Evaluate sample ids [start, stop) in fixed chunks; merge partials in order."""
    ranges = _chunk_ranges(start, stop)
    if pool is None:
        parts = [fn(case, level_index, ids, master_seed, unit_cost) for ids in ranges]
    else:
        futures = [pool.submit(fn, case, level_index, ids, master_seed, unit_cost) for ids in ranges]
        parts = [f.result() for f in futures]
    merged = None
    for part in parts:
        if merged is None:
            merged = part
        else:
            for acc, extra in zip(merged, part):
                acc.merge(extra)
    return merged


def _maybe_pool(workers: int):
    if workers and workers > 1:
        return ProcessPoolExecutor(max_workers=workers)
    return None


class _LevelAccumulator:
    def __init__(self, level_index: int, unit_cost: float):
        self.level_index = level_index
        self.unit_cost = unit_cost
        self.n_drawn = 0
        self.corr = FieldStats()
        self.sol = FieldStats()


def run_mlmc(case, delta: float, master_seed: int, *, n_initial: int = 500, alpha: float = 1.0,
             max_level: Optional[int] = None, workers: int = 1, dims: int = 2) -> EstimatorReport:
    """Adaptive multilevel run: add levels until the correction-norm test accepts.

    Per level the corrections are sampled with coupled seeds, allocations are
    recomputed from all accumulated samples, and the report carries both the
    drawn-sample cost and the cost the final un-floored optimal allocation
    implies (the quantity the cost theorems bound).
    """
    hier = case.hierarchy
    gamma = hier.gamma
    dx0 = hier.dx0
    l_top = hier.max_level if max_level is None else min(max_level, hier.max_level)
    pool = _maybe_pool(workers)
    levels: List[_LevelAccumulator] = []
    converged = False
    try:
        for l in range(l_top + 1):
            acc = _LevelAccumulator(l, pair_cost(l, gamma, dims))
            levels.append(acc)
            part = _run_chunks(_eval_correction_chunk, case, l, 0, n_initial, master_seed,
                               acc.unit_cost, pool)
            acc.corr, acc.sol = part
            acc.n_drawn = n_initial
            # re-allocate and top up until the variance budget holds with the
            # refreshed estimates (a single pass can undershoot after update)
            for _ in range(12):
                variances = [a.corr.scalar_variance(dx0) for a in levels]
                costs = [a.unit_cost for a in levels]
                plan = optimal_allocation(variances, costs, delta, zero_variance_floor=n_initial)
                topped = False
                for a, target in zip(levels, plan.n_per_level):
                    target = int(target)
                    if target > a.n_drawn:
                        part = _run_chunks(_eval_correction_chunk, case, a.level_index,
                                           a.n_drawn, target, master_seed, a.unit_cost, pool)
                        a.corr.merge(part[0])
                        a.sol.merge(part[1])
                        a.n_drawn = target
                        topped = True
                budget = sum(
                    a.corr.scalar_variance(dx0) / a.n_drawn for a in levels if a.n_drawn > 0
                )
                if not topped or budget <= delta**2 / 2.0:
                    break
            noise = levels[l].corr.scalar_variance(dx0) / levels[l].n_drawn
            if l >= 1 and stopping_mlmc(levels[l].corr.mean, dx0, gamma, alpha, delta,
                                        noise_var=noise):
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return _assemble_mlmc_report(case, delta, master_seed, levels, converged, dx0)


def _assemble_mlmc_report(case, delta, master_seed, levels, converged, dx0) -> EstimatorReport:
    qoi = None
    total_cost = 0.0
    allocation_cost = 0.0
    per_level = []
    variances = [a.corr.scalar_variance(dx0) for a in levels]
    mu = 2.0 * delta**-2 * sum(math.sqrt(v * a.unit_cost) for v, a in zip(variances, levels))
    est_var = 0.0
    for a, v in zip(levels, variances):
        qoi = a.corr.mean.copy() if qoi is None else qoi + a.corr.mean
        total_cost += a.n_drawn * a.unit_cost
        n_opt = max(1, math.ceil(mu * math.sqrt(v / a.unit_cost) - 1e-12)) if v > 0 else 1
        allocation_cost += n_opt * a.unit_cost
        est_var += v / a.n_drawn
        per_level.append(
            LevelReport(
                level_index=a.level_index,
                n_samples=a.n_drawn,
                variance=v,
                unit_cost=a.unit_cost,
                correction_norm=a.corr.mean_norm(dx0),
                solution_variance=a.sol.scalar_variance(dx0),
            )
        )
    return EstimatorReport(
        method="mlmc", delta=delta, finest_level=levels[-1].level_index, converged=converged,
        per_level=per_level, qoi_field=qoi, total_cost=total_cost,
        allocation_cost=allocation_cost, estimator_variance=est_var, master_seed=master_seed,
    )


def run_mc(case, delta: float, master_seed: int, *, n_initial: int = 500, alpha: float = 1.0,
           max_level: Optional[int] = None, workers: int = 1, dims: int = 2) -> EstimatorReport:
    """Adaptive single-level run: only the finest level's samples form the estimate."""
    hier = case.hierarchy
    gamma = hier.gamma
    dx0 = hier.dx0
    l_top = hier.max_level if max_level is None else min(max_level, hier.max_level)
    pool = _maybe_pool(workers)
    levels: List[_LevelAccumulator] = []
    converged = False
    try:
        for l in range(l_top + 1):
            acc = _LevelAccumulator(l, solution_cost(l, gamma, dims))
            levels.append(acc)
            part = _run_chunks(_eval_solution_chunk, case, l, 0, n_initial, master_seed,
                               acc.unit_cost, pool)
            acc.sol = part[0]
            acc.n_drawn = n_initial
            for _ in range(12):
                target = max(
                    mc_allocation(acc.sol.scalar_variance(dx0), delta, zero_variance_floor=n_initial),
                    acc.n_drawn,
                )
                if target <= acc.n_drawn:
                    break
                part = _run_chunks(_eval_solution_chunk, case, l, acc.n_drawn, target,
                                   master_seed, acc.unit_cost, pool)
                acc.sol.merge(part[0])
                acc.n_drawn = target
                if acc.sol.scalar_variance(dx0) / acc.n_drawn <= delta**2 / 2.0:
                    break
            prev = levels[l - 1]
            noise = (acc.sol.scalar_variance(dx0) / acc.n_drawn
                     + prev.sol.scalar_variance(dx0) / prev.n_drawn)
            if l >= 1 and stopping_mc(acc.sol.mean, prev.sol.mean, dx0, gamma,
                                      alpha, delta, noise_var=noise):
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    per_level = []
    total_cost = 0.0
    allocation_cost = 0.0
    for a in levels:
        v = a.sol.scalar_variance(dx0)
        total_cost += a.n_drawn * a.unit_cost
        n_opt = max(1, math.ceil(2.0 * delta**-2 * v - 1e-12)) if v > 0 else 1
        allocation_cost += n_opt * a.unit_cost
        per_level.append(
            LevelReport(
                level_index=a.level_index,
                n_samples=a.n_drawn,
                variance=v,
                unit_cost=a.unit_cost,
                correction_norm=float("nan"),
                solution_variance=v,
            )
        )
    last = levels[-1]
    return EstimatorReport(
        method="mc", delta=delta, finest_level=last.level_index, converged=converged,
        per_level=per_level, qoi_field=last.sol.mean.copy(), total_cost=total_cost,
        allocation_cost=allocation_cost,
        estimator_variance=last.sol.scalar_variance(dx0) / last.n_drawn,
        master_seed=master_seed,
    )


def measure_level_stats(case, levels, n_samples: int, master_seed: int, *, workers: int = 1,
                        dims: int = 2) -> List[LevelStats]:
    """Fixed-size variance study: n coupled pairs per level (level 0: plain solves)."""
    pool = _maybe_pool(workers)
    out = []
    try:
        for l in levels:
            unit = pair_cost(l, case.hierarchy.gamma, dims)
            corr, sol = _run_chunks(_eval_correction_chunk, case, l, 0, n_samples, master_seed,
                                    unit, pool)
            out.append(LevelStats(level_index=l, unit_cost=unit, stats_correction=corr,
                                  stats_solution=sol))
    finally:
        if pool is not None:
            pool.shutdown()
    return out
