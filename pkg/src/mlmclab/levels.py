"""Nested space-time discretization levels, grid transfer, and cost bookkeeping.

A hierarchy refines both mesh size and time step by the same integer ratio,
so the CFL ratio dt/dx is identical on every level and the grids are nested.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigurationError(ValueError):
    """Raised when hierarchy parameters are inconsistent (non-divisible domain, etc.)."""


@dataclass(frozen=True)
class LevelSpec:
    """One discretization level: mesh size, time step and their integer extents."""

    level_index: int
    dx: float
    dt: float
    n_cells: int
    n_steps: int
    cfl_ratio: float

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt


@dataclass(frozen=True)
class GridHierarchy:
    """Family of nested levels sharing domain, horizon and CFL ratio.

    Level l has n_cells0 * gamma**l cells and n_steps0 * gamma**l steps, so
    dt_{l-1} = gamma * dt_l exactly (binary-exact for dyadic dx0, kappa).
    """

    x_lo: float
    x_hi: float
    t_final: float
    gamma: int
    dx0: float
    kappa: float
    n_cells0: int
    n_steps0: int
    max_level: int

    @property
    def domain_length(self) -> float:
        return self.x_hi - self.x_lo

    def level(self, l: int) -> LevelSpec:
        if l < 0 or l > self.max_level:
            raise ValueError(f"level {l} outside [0, {self.max_level}]")
        r = self.gamma**l
        return LevelSpec(
            level_index=l,
            dx=self.dx0 / r,
            dt=self.kappa * self.dx0 / r,
            n_cells=self.n_cells0 * r,
            n_steps=self.n_steps0 * r,
            cfl_ratio=self.kappa,
        )

    def nodes(self, l: int) -> np.ndarray:
        """Grid points x_i = x_lo + i*dx, i=0..n_cells-1 (right endpoint omitted: periodic)."""
        spec = self.level(l)
        return self.x_lo + spec.dx * np.arange(spec.n_cells)

    def centers(self, l: int) -> np.ndarray:
        """Cell centers for finite-volume fields."""
        spec = self.level(l)
        return self.x_lo + spec.dx * (np.arange(spec.n_cells) + 0.5)


@dataclass
class FieldSolution:
    """Cell/grid-indexed solution fields at final time on one level.

    values has shape (n_variables, n_cells); variables names the rows.
    """

    level_index: int
    variables: tuple
    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if self.values.shape[0] != len(self.variables):
            raise ValueError("one row of values per variable required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in field solution")

    @property
    def n_cells(self) -> int:
        return self.values.shape[1]

    def get(self, name: str) -> np.ndarray:
        return self.values[self.variables.index(name)]


def build_hierarchy(domain, t_final, gamma, dx0, kappa, max_level) -> GridHierarchy:
    """Validate parameters and construct the level hierarchy.

    dx0 must divide the domain length and kappa*dx0 must divide t_final so
    that every level has integer cell/step counts.
    """
    x_lo, x_hi = float(domain[0]), float(domain[1])
    if x_hi <= x_lo:
        raise ConfigurationError("empty domain")
    if int(gamma) != gamma or gamma < 2:
        raise ConfigurationError(f"refinement ratio must be an integer >= 2, got {gamma}")
    if dx0 <= 0 or kappa <= 0 or t_final <= 0:
        raise ConfigurationError("dx0, kappa, t_final must be positive")
    length = x_hi - x_lo
    n_cells0 = int(round(length / dx0))
    if abs(n_cells0 * dx0 - length) > 1e-9 * length or n_cells0 < 1:
        raise ConfigurationError(f"dx0={dx0} does not divide the domain length {length}")
    dt0 = kappa * dx0
    n_steps0 = int(round(t_final / dt0))
    if abs(n_steps0 * dt0 - t_final) > 1e-9 * t_final or n_steps0 < 1:
        raise ConfigurationError(f"dt0={dt0} does not divide the horizon {t_final}")
    return GridHierarchy(
        x_lo=x_lo,
        x_hi=x_hi,
        t_final=t_final,
        gamma=int(gamma),
        dx0=dx0,
        kappa=kappa,
        n_cells0=n_cells0,
        n_steps0=n_steps0,
        max_level=int(max_level),
    )


def restrict_field(fine: FieldSolution, to_level: int, gamma: int) -> FieldSolution:
    """Injection restriction onto a coarser nested grid.

    Coarse entry i takes the fine value at index i * gamma**(level difference);
    for nodal fields the points coincide, and the choice keeps telescoping
    sums exact.
    """
    if to_level > fine.level_index:
        raise ValueError(f"cannot restrict level {fine.level_index} to finer level {to_level}")
    stride = gamma ** (fine.level_index - to_level)
    return FieldSolution(
        level_index=to_level,
        variables=fine.variables,
        values=fine.values[:, ::stride].copy(),
    )


def pair_cost(level: int, gamma: int, dims: int = 2) -> float:
    """Cost of one coupled correction sample, in level-0 sample units.

    Level 0: a single coarse solve, cost 1. Level l >= 1: fine plus coarse
    member, gamma**(dims*l) + gamma**(dims*(l-1)).
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    if level == 0:
        return 1.0
    return float(gamma ** (dims * level) + gamma ** (dims * (level - 1)))


def solution_cost(level: int, gamma: int, dims: int = 2) -> float:
    """Cost of a single solution sample on a level (plain Monte Carlo unit)."""
    if level < 0:
        raise ValueError("level must be >= 0")
    return float(gamma ** (dims * level))
