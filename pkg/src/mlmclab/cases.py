"""Experiment cases: a PDE problem plus the level-coupled randomness that drives it.

A case knows how to produce one independent solution sample on a level and one
coupled fine/coarse pair for the multilevel corrections. Finite-K cases share
the identical parameter draw between the two members; white-noise cases drive
the coarse member with max-power coarsened seeds; the random-choice case
couples inside the time loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import relaxation, solvers
from .levels import FieldSolution, GridHierarchy
from .random_inputs import (
    SampleKey,
    SeedArray,
    coarsen_seeds_time,
    draw_seeds,
    seeds_to_path,
)


def smooth_wave(x):
    """Default smooth periodic initial profile on [-1, 1]."""
    return 0.5 + 0.25 * np.sin(np.pi * x)


def paper_wave(x):
    """(sin(x)+1)/2, the quasi-linear profile used by the exact-solution variance law."""
    return 0.5 * (np.sin(x) + 1.0)


def _param_key(master_seed: int, sample_id: int, level_index: int) -> SampleKey:
    return SampleKey(master_seed=master_seed, sample_id=sample_id, level_index=level_index,
                     stream_tag="param")


@dataclass
class AdvectionCase:
    """Scalar transport with random velocity: piecewise-K in time or white noise in time."""

    hierarchy: GridHierarchy
    K: Optional[int] = None  # None: white noise (K_l = n_steps of the level)
    a_mean: float = 1.0
    amplitude: float = 1.0
    initial: callable = smooth_wave
    label: str = "advection"
    qoi_name: str = "u"

    def __post_init__(self):
        self.problem = solvers.AdvectionProblem(hierarchy=self.hierarchy, initial=self.initial)

    def _path(self, seeds: SeedArray, K: int):
        kind = "piecewise" if self.K is not None else "white_noise_time"
        return seeds_to_path(seeds, kind, self.a_mean, self.amplitude, K)

    def solution_sample(self, level_index: int, sample_id: int, master_seed: int) -> FieldSolution:
        level = self.hierarchy.level(level_index)
        K = self.K if self.K is not None else level.n_steps
        seeds = draw_seeds(_param_key(master_seed, sample_id, level_index), "time", K)
        return solvers.solve_advection(self.problem, level, self._path(seeds, K))

    def coupled_pair(self, level_index: int, sample_id: int, master_seed: int):
        fine = self.hierarchy.level(level_index)
        coarse = self.hierarchy.level(level_index - 1)
        key = _param_key(master_seed, sample_id, level_index)
        if self.K is not None:
            seeds = draw_seeds(key, "time", self.K)
            path = self._path(seeds, self.K)
            return (
                solvers.solve_advection(self.problem, fine, path),
                solvers.solve_advection(self.problem, coarse, path),
            )
        seeds_f = draw_seeds(key, "time", fine.n_steps)
        seeds_c = coarsen_seeds_time(seeds_f, self.hierarchy.gamma)
        return (
            solvers.solve_advection(self.problem, fine, self._path(seeds_f, fine.n_steps)),
            solvers.solve_advection(self.problem, coarse, self._path(seeds_c, coarse.n_steps)),
        )

    def exact_sample(self, level_index: int, sample_id: int, master_seed: int) -> FieldSolution:
        """Characteristics-formula sample on the level's grid (bias/variance oracle)."""
        level = self.hierarchy.level(level_index)
        K = self.K if self.K is not None else level.n_steps
        seeds = draw_seeds(_param_key(master_seed, sample_id, level_index), "time", K)
        return solvers.advection_exact(self.problem, self._path(seeds, K), level)


@dataclass
class EulerCase:
    """Euler with gravity and random adiabatic exponent, piecewise-K or white noise in time."""

    hierarchy: GridHierarchy
    K: Optional[int] = None
    gravity: float = 0.1
    A0: float = 1.0
    lam_mean: float = 4.0 / 3.0
    amplitude: float = 1.0 / 3.0
    label: str = "euler"
    qoi_name: str = "rho"

    def __post_init__(self):
        self.problem = solvers.EulerProblem(hierarchy=self.hierarchy, gravity=self.gravity,
                                            A0=self.A0, lam0=self.lam_mean)

    def _path(self, seeds: SeedArray, K: int):
        kind = "piecewise" if self.K is not None else "white_noise_time"
        return seeds_to_path(seeds, kind, self.lam_mean, self.amplitude, K)

    def solution_sample(self, level_index: int, sample_id: int, master_seed: int) -> FieldSolution:
        level = self.hierarchy.level(level_index)
        K = self.K if self.K is not None else level.n_steps
        seeds = draw_seeds(_param_key(master_seed, sample_id, level_index), "time", K)
        return solvers.solve_euler(self.problem, level, self._path(seeds, K))

    def coupled_pair(self, level_index: int, sample_id: int, master_seed: int):
        fine = self.hierarchy.level(level_index)
        coarse = self.hierarchy.level(level_index - 1)
        key = _param_key(master_seed, sample_id, level_index)
        if self.K is not None:
            seeds = draw_seeds(key, "time", self.K)
            path = self._path(seeds, self.K)
            return (
                solvers.solve_euler(self.problem, fine, path),
                solvers.solve_euler(self.problem, coarse, path),
            )
        seeds_f = draw_seeds(key, "time", fine.n_steps)
        seeds_c = coarsen_seeds_time(seeds_f, self.hierarchy.gamma)
        return (
            solvers.solve_euler(self.problem, fine, self._path(seeds_f, fine.n_steps)),
            solvers.solve_euler(self.problem, coarse, self._path(seeds_c, coarse.n_steps)),
        )


@dataclass
class ShallowWaterCase:
    """Shallow water with random topography weights, piecewise-K or white noise in space.

    Runs the still-water configuration (zero initial velocity) by default; the
    perturbed surface h0 + B is what sets off the dynamics.
    """

    hierarchy: GridHierarchy
    K: Optional[int] = None
    gravity: float = 1.0
    velocity0: Optional[callable] = None
    label: str = "shallow_water"
    qoi_name: str = "h"

    def __post_init__(self):
        v0 = self.velocity0 if self.velocity0 is not None else zero_profile
        self.problem = solvers.ShallowWaterProblem(hierarchy=self.hierarchy, gravity=self.gravity,
                                                   velocity0=v0)

    def _path(self, seeds: SeedArray, K: int):
        kind = "piecewise" if self.K is not None else "white_noise_space"
        # one-sided U(0,1) weights
        return seeds_to_path(seeds, kind, 0.0, 1.0, K, law="one_sided")

    def solution_sample(self, level_index: int, sample_id: int, master_seed: int) -> FieldSolution:
        level = self.hierarchy.level(level_index)
        K = self.K if self.K is not None else level.n_cells
        seeds = draw_seeds(_param_key(master_seed, sample_id, level_index), "space", K)
        return solvers.solve_shallow_water(self.problem, level, self._path(seeds, K))

    def coupled_pair(self, level_index: int, sample_id: int, master_seed: int):
        fine = self.hierarchy.level(level_index)
        coarse = self.hierarchy.level(level_index - 1)
        key = _param_key(master_seed, sample_id, level_index)
        if self.K is not None:
            seeds = draw_seeds(key, "space", self.K)
            path = self._path(seeds, self.K)
            return (
                solvers.solve_shallow_water(self.problem, fine, path),
                solvers.solve_shallow_water(self.problem, coarse, path),
            )
        seeds_f = draw_seeds(key, "space", fine.n_cells)
        seeds_c = coarsen_seeds_time(seeds_f, self.hierarchy.gamma)
        return (
            solvers.solve_shallow_water(self.problem, fine, self._path(seeds_f, fine.n_cells)),
            solvers.solve_shallow_water(self.problem, coarse, self._path(seeds_c, coarse.n_cells)),
        )


def zero_profile(x):
    return np.zeros_like(x)


@dataclass
class RandomChoiceCase:
    """Random-choice (semi or fully random) relaxation scheme; randomness lives in the algorithm."""

    hierarchy: GridHierarchy
    mode: str = "fully_random"
    a: float = 1.0
    b: float = 2.0
    epsilon: float = 1.0
    initial: callable = smooth_wave
    v_initial: Optional[callable] = None
    label: str = "random_choice"
    qoi_name: str = "u"

    def __post_init__(self):
        self.problem = relaxation.RelaxationProblem(
            hierarchy=self.hierarchy, a=self.a, b=self.b, epsilon=self.epsilon,
            u0=self.initial, v0=self.v_initial,
        )

    def solution_sample(self, level_index: int, sample_id: int, master_seed: int) -> FieldSolution:
        level = self.hierarchy.level(level_index)
        key = _param_key(master_seed, sample_id, level_index)
        return relaxation.apmc_solve(self.problem, level, self.mode, key)

    def coupled_pair(self, level_index: int, sample_id: int, master_seed: int):
        level = self.hierarchy.level(level_index)
        key = _param_key(master_seed, sample_id, level_index)
        return relaxation.mlapmc_coupled_pair(self.problem, level, key, mode=self.mode)


@dataclass
class SyntheticCase:
    """Analytic level model for driver tests: constant fields with known bias and spread.

    P_l(s) = mean_inf + bias_coef*dt_l + (noise_inf + noise_coef*dt_l)*z(s) with
    z standard normal; coupled pairs share z, so correction variances decay
    exactly like dt^2 while solution variances stay O(1).
    """

    hierarchy: GridHierarchy
    mean_inf: float = 1.0
    bias_coef: float = 1.0
    noise_inf: float = 0.1
    noise_coef: float = 0.0
    label: str = "synthetic"
    qoi_name: str = "u"

    def _value(self, level_index: int, z: float) -> float:
        dt = self.hierarchy.level(level_index).dt
        return self.mean_inf + self.bias_coef * dt + (self.noise_inf + self.noise_coef * dt) * z

    def _field(self, level_index: int, value: float) -> FieldSolution:
        n = self.hierarchy.level(level_index).n_cells
        return FieldSolution(level_index=level_index, variables=("u",),
                             values=np.full((1, n), value))

    def solution_sample(self, level_index: int, sample_id: int, master_seed: int) -> FieldSolution:
        z = float(_param_key(master_seed, sample_id, level_index).generator().standard_normal())
        return self._field(level_index, self._value(level_index, z))

    def coupled_pair(self, level_index: int, sample_id: int, master_seed: int):
        z = float(_param_key(master_seed, sample_id, level_index).generator().standard_normal())
        return (
            self._field(level_index, self._value(level_index, z)),
            self._field(level_index - 1, self._value(level_index - 1, z)),
        )
