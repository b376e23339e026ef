"""Reproducible seed streams, physical parameter paths, and level coupling.

All sample randomness starts as uniform seeds in [0,1) drawn from counter-based
(Philox) generators keyed by (master_seed, level, sample, stream). Coupling of
consecutive levels happens in seed space with the max-power trick: the maximum
of a block of fine uniforms, raised to the block size, is again uniform, so the
coarse member of a pair sees correctly distributed but strongly correlated
inputs. Physical parameters (velocity, adiabatic constant, topography weights)
are affine images of the seeds, applied after any coarsening.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

STREAM_TAGS = {"param": 0, "convection_rho": 1, "convection_l": 2, "relaxation": 3}

_LAYOUTS = ("time", "space", "spacetime")


@dataclass(frozen=True)
class SampleKey:
    """Identity of one sample's random input stream; distinct keys give independent streams."""

    master_seed: int
    sample_id: int
    level_index: int
    stream_tag: str = "param"

    def with_stream(self, tag: str) -> "SampleKey":
        return replace(self, stream_tag=tag)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(self.level_index, self.sample_id, STREAM_TAGS[self.stream_tag]),
        )
        return np.random.Generator(np.random.Philox(ss))


@dataclass
class SeedArray:
    """Uniform [0,1) seeds with a layout tag tying the shape to a level's extents."""

    values: np.ndarray
    layout: str
    level_index: int

    def __post_init__(self):
        if self.layout not in _LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.layout == "spacetime" and self.values.ndim != 2:
            raise ValueError("spacetime layout requires a 2-D (n_steps, n_cells) array")


def draw_seeds(key: SampleKey, layout: str, shape) -> SeedArray:
    """Draw a seed array as a pure function of the key.

    Same key, bit-identical output, independent of call order or thread count.
    """
    values = key.generator().random(shape)
    return SeedArray(values=values, layout=layout, level_index=key.level_index)


def coarsen_seeds_time(fine: SeedArray, gamma: int) -> SeedArray:
    """Coarse seed n = (max of gamma consecutive fine seeds)**gamma.

    Preserves the uniform marginal: P[(max U_1..U_g)^g <= s] = s. Valid for any
    1-D layout (blocks run along the single axis), used for white-noise-in-time
    velocity/adiabatic paths and white-noise-in-space topography weights.
    """
    if fine.values.ndim != 1:
        raise ValueError("1-D seed array required")
    n = fine.values.shape[0]
    if n % gamma != 0:
        raise ValueError(f"length {n} not divisible by gamma={gamma}")
    blocks = fine.values.reshape(n // gamma, gamma)
    coarse = blocks.max(axis=1) ** gamma
    return SeedArray(values=coarse, layout=fine.layout, level_index=fine.level_index - 1)


def coarsen_seeds_spacetime(fine: SeedArray, gamma: int) -> SeedArray:
    """One coarse seed per gamma x gamma space-time block, value (block max)**gamma^2."""
    if fine.values.ndim != 2:
        raise ValueError("2-D (n_steps, n_cells) seed array required")
    nt, nx = fine.values.shape
    if nt % gamma != 0 or nx % gamma != 0:
        raise ValueError(f"extents ({nt}, {nx}) not divisible by gamma={gamma}")
    blocks = fine.values.reshape(nt // gamma, gamma, nx // gamma, gamma)
    coarse = blocks.max(axis=(1, 3)) ** (gamma * gamma)
    return SeedArray(values=coarse, layout="spacetime", level_index=fine.level_index - 1)


@dataclass
class ParameterPath:
    """Physical random parameter values over time intervals or space cells.

    kind 'piecewise': K values, constant on K equal sub-intervals of the
    horizon (or domain). kind 'white_noise_time'/'white_noise_space': one value
    per step/cell of the owning level. For one-sided laws the values are the
    raw weights in [base, base+amplitude).
    """

    kind: str
    K: int
    base: float
    amplitude: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.K,):
            raise ValueError(f"expected {self.K} values, got shape {self.values.shape}")

    def expand_steps(self, n_steps: int) -> np.ndarray:
        """Per-step parameter values a(t_n), n = 0..n_steps-1.

        Step n falls in sub-interval floor(n*K/n_steps); exact in integer
        arithmetic, identity when K == n_steps.
        """
        if self.K == n_steps:
            return self.values
        idx = (np.arange(n_steps) * self.K) // n_steps
        return self.values[idx]

    def expand_cells(self, n_cells: int) -> np.ndarray:
        """Per-cell parameter values by the spatial analogue of expand_steps."""
        return self.expand_steps(n_cells)


def seeds_to_path(seeds: SeedArray, kind: str, base: float, amplitude: float, K: int,
                  law: str = "symmetric") -> ParameterPath:
    """Map uniform seeds to a physical parameter path.

    law 'symmetric': s -> base + amplitude*(2s-1), i.e. Uniform(base-amp, base+amp).
    law 'one_sided': s -> base + amplitude*s, i.e. Uniform(base, base+amp)
    (topography weights use base=0, amplitude=1).
    """
    vals = np.asarray(seeds.values, dtype=np.float64).reshape(-1)
    if vals.shape[0] != K:
        raise ValueError(f"need {K} seeds, got {vals.shape[0]}")
    if law == "symmetric":
        values = base + amplitude * (2.0 * vals - 1.0)
    elif law == "one_sided":
        values = base + amplitude * vals
    else:
        raise ValueError(f"unknown law {law!r}")
    return ParameterPath(kind=kind, K=K, base=base, amplitude=amplitude, values=values)
