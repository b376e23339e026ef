"""Linear two-speed (Jin-Xin) relaxation system and its random-choice schemes.

The split scheme advances the characteristic variables rho = sqrt(a) u + v,
l = sqrt(a) u - v by upwind convection and then relaxes v toward the local
equilibrium b*u with the implicit-Euler weight p = eps/(eps + dt). Both
sub-steps are convex combinations, so each admits a Monte Carlo (random
choice) realization whose seed-average equals the deterministic update:
convection shifts a cell with probability nu = sqrt(a) dt/dx, relaxation
keeps v with probability p. The multilevel pair sampler drives the coarse
member with block-maximum seeds raised to gamma^2, which preserves the
uniform law while correlating the levels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import _kernels
from .levels import ConfigurationError, FieldSolution, GridHierarchy, LevelSpec
from .random_inputs import SampleKey

MODES = ("deterministic", "semi_random", "fully_random")

# fine seed entries drawn per chunk, keeps transient arrays small at any level
_CHUNK_ENTRIES = 1 << 18


@dataclass
class RelaxationProblem:
    """System u_t + v_x = 0, v_t + a u_x = -(v - b u)/eps on a periodic interval."""

    hierarchy: GridHierarchy
    a: float
    b: float
    epsilon: float
    u0: Callable[[np.ndarray], np.ndarray]
    v0: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.a <= 0 or self.epsilon <= 0:
            raise ConfigurationError("need a > 0 and epsilon > 0")

    def initial_state(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u = np.asarray(self.u0(x), dtype=np.float64).copy()
        v = np.zeros_like(u) if self.v0 is None else np.asarray(self.v0(x), dtype=np.float64).copy()
        return u, v

    def relax_weight(self, dt: float) -> float:
        return self.epsilon / (self.epsilon + dt)

    def cfl_number(self, level: LevelSpec) -> float:
        nu = np.sqrt(self.a) * level.cfl_ratio
        if nu > 1.0 + 1e-12:
            raise ConfigurationError(f"nu = sqrt(a)*kappa = {nu:.4f} exceeds 1")
        return float(nu)


@dataclass
class JinXinState:
    """One level's solution state plus the scheme parameters bound to it."""

    u: np.ndarray
    v: np.ndarray
    a: float
    b: float
    epsilon: float
    nu: float
    p_relax: float

    def copy(self) -> "JinXinState":
        return JinXinState(self.u.copy(), self.v.copy(), self.a, self.b, self.epsilon,
                           self.nu, self.p_relax)


@dataclass
class CharacteristicPair:
    rho: np.ndarray
    ell: np.ndarray


def to_characteristic(u: np.ndarray, v: np.ndarray, a: float) -> CharacteristicPair:
    sqa = np.sqrt(a)
    return CharacteristicPair(rho=sqa * u + v, ell=sqa * u - v)


def from_characteristic(pair: CharacteristicPair, a: float) -> Tuple[np.ndarray, np.ndarray]:
    sqa = np.sqrt(a)
    return (pair.rho + pair.ell) / (2.0 * sqa), (pair.rho - pair.ell) / 2.0


def make_state(problem: RelaxationProblem, level: LevelSpec) -> JinXinState:
    x = problem.hierarchy.nodes(level.level_index)
    u, v = problem.initial_state(x)
    return JinXinState(
        u=u, v=v, a=problem.a, b=problem.b, epsilon=problem.epsilon,
        nu=problem.cfl_number(level), p_relax=problem.relax_weight(level.dt),
    )


def jinxin_deterministic_step(state: JinXinState) -> JinXinState:
    """One split step of the deterministic scheme (energy-dissipative for a >= b^2)."""
    if state.a < state.b**2:
        raise ConfigurationError(f"subcharacteristic condition a >= b^2 fails: a={state.a}, b={state.b}")
    out = state.copy()
    _kernels.relax_deterministic(out.u, out.v, 1, state.nu, state.p_relax, state.b, np.sqrt(state.a))
    return out


def apmc_convection_sample(state: JinXinState, seeds_xi: np.ndarray, seeds_eta: np.ndarray) -> JinXinState:
    """Random-choice convection: rho_i <- rho_{i-1} iff xi_i < nu, l_i <- l_{i+1} iff eta_i < nu."""
    xi = np.asarray(seeds_xi, dtype=np.float64)
    eta = np.asarray(seeds_eta, dtype=np.float64)
    if xi.shape != state.u.shape or eta.shape != state.u.shape:
        raise ValueError("one xi and one eta seed per cell required")
    pair = to_characteristic(state.u, state.v, state.a)
    shift_r = xi < state.nu
    shift_l = eta < state.nu
    rho = np.where(shift_r, np.roll(pair.rho, 1), pair.rho)
    ell = np.where(shift_l, np.roll(pair.ell, -1), pair.ell)
    out = state.copy()
    out.u, out.v = from_characteristic(CharacteristicPair(rho, ell), state.a)
    return out


def apmc_relaxation_sample(state: JinXinState, seeds_zeta: np.ndarray) -> JinXinState:
    """Random-choice relaxation: keep v iff zeta_i < p, otherwise relax to b*u."""
    zeta = np.asarray(seeds_zeta, dtype=np.float64)
    if zeta.shape != state.u.shape:
        raise ValueError("one zeta seed per cell required")
    out = state.copy()
    out.v = np.where(zeta < state.p_relax, state.v, state.b * state.u)
    return out


def _streams(key: SampleKey):
    return (
        key.with_stream("convection_rho").generator(),
        key.with_stream("convection_l").generator(),
        key.with_stream("relaxation").generator(),
    )


def _chunk_steps(n_cells: int, per_block: int) -> int:
    return max(1, _CHUNK_ENTRIES // max(1, n_cells * per_block))


def apmc_solve(problem: RelaxationProblem, level: LevelSpec, mode: str, key: SampleKey) -> FieldSolution:
    """Run one sample of the chosen scheme variant to the horizon."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    nu = problem.cfl_number(level)
    p = problem.relax_weight(level.dt)
    sqa = np.sqrt(problem.a)
    x = problem.hierarchy.nodes(level.level_index)
    u, v = problem.initial_state(x)
    nx, nt = level.n_cells, level.n_steps
    if mode == "deterministic":
        _kernels.relax_deterministic(u, v, nt, nu, p, problem.b, sqa)
    else:
        gen_xi, gen_eta, gen_zeta = _streams(key)
        chunk = _chunk_steps(nx, 1)
        done = 0
        while done < nt:
            m = min(chunk, nt - done)
            zeta = gen_zeta.integers(0, 2**32, size=(m, nx), dtype=np.uint32)
            if mode == "semi_random":
                _kernels.relax_semi_random(u, v, zeta, nu, p, problem.b, sqa)
            else:
                xi = gen_xi.integers(0, 2**32, size=(m, nx), dtype=np.uint32)
                eta = gen_eta.integers(0, 2**32, size=(m, nx), dtype=np.uint32)
                _kernels.relax_fully_random(u, v, xi, eta, zeta, nu, p, problem.b, sqa)
            done += m
    return FieldSolution(level_index=level.level_index, variables=("u", "v"), values=np.stack([u, v]))


def _coarsen_u32(block: np.ndarray, gamma: int) -> np.ndarray:
    """(n_fine_steps, nx_fine) uint32 -> (n_coarse_steps, nx_coarse) float64 in [0,1)."""
    nt, nx = block.shape
    m = block.reshape(nt // gamma, gamma, nx // gamma, gamma).max(axis=(1, 3))
    return (m.astype(np.float64) * _kernels.U32_TO_UNIT) ** (gamma * gamma)


def mlapmc_coupled_pair(problem: RelaxationProblem, level: LevelSpec, key: SampleKey,
                        mode: str = "fully_random") -> Tuple[FieldSolution, FieldSolution]:
    """Advance fine and coarse members of one correction pair with coupled seeds.

    The fine member runs gamma substeps per coarse step; each coarse seed is the
    maximum of the corresponding gamma x gamma (space x time) fine seed block
    raised to gamma^2, so the coarse marginal law matches an independent
    level-(l-1) run.
    """
    if level.level_index < 1:
        raise ValueError("coupled pair needs level >= 1")
    if mode not in ("semi_random", "fully_random"):
        raise ValueError("coupled pair is defined for the random modes")
    hier = problem.hierarchy
    gamma = hier.gamma
    coarse_spec = hier.level(level.level_index - 1)
    nu = problem.cfl_number(level)
    p_f = problem.relax_weight(level.dt)
    p_c = problem.relax_weight(coarse_spec.dt)
    sqa = np.sqrt(problem.a)
    uf, vf = problem.initial_state(hier.nodes(level.level_index))
    uc, vc = problem.initial_state(hier.nodes(coarse_spec.level_index))
    nxf = level.n_cells
    gen_xi, gen_eta, gen_zeta = _streams(key)
    chunk = _chunk_steps(nxf, gamma)  # coarse steps per chunk
    done = 0
    while done < coarse_spec.n_steps:
        m = min(chunk, coarse_spec.n_steps - done)
        zeta = gen_zeta.integers(0, 2**32, size=(m * gamma, nxf), dtype=np.uint32)
        zeta_c = _coarsen_u32(zeta, gamma)
        if mode == "semi_random":
            _kernels.relax_semi_random(uf, vf, zeta, nu, p_f, problem.b, sqa)
            _kernels.relax_semi_random_f64(uc, vc, zeta_c, nu, p_c, problem.b, sqa)
        else:
            xi = gen_xi.integers(0, 2**32, size=(m * gamma, nxf), dtype=np.uint32)
            eta = gen_eta.integers(0, 2**32, size=(m * gamma, nxf), dtype=np.uint32)
            _kernels.relax_fully_random(uf, vf, xi, eta, zeta, nu, p_f, problem.b, sqa)
            _kernels.relax_fully_random_f64(uc, vc, _coarsen_u32(xi, gamma), _coarsen_u32(eta, gamma),
                                            zeta_c, nu, p_c, problem.b, sqa)
        done += m
    fine = FieldSolution(level_index=level.level_index, variables=("u", "v"), values=np.stack([uf, vf]))
    coarse = FieldSolution(level_index=coarse_spec.level_index, variables=("u", "v"),
                           values=np.stack([uc, vc]))
    return fine, coarse


def asymptotic_limit_solve(problem: RelaxationProblem, level: LevelSpec) -> FieldSolution:
    """Limit scheme of the split method as eps -> 0: 3-point update of u, v = b*u."""
    nu = problem.cfl_number(level)
    x = problem.hierarchy.nodes(level.level_index)
    u, _ = problem.initial_state(x)
    _kernels.relax_limit(u, level.n_steps, nu, problem.b, np.sqrt(problem.a))
    return FieldSolution(level_index=level.level_index, variables=("u", "v"),
                         values=np.stack([u, problem.b * u]))


@dataclass
class JinXinDiagnostics:
    """Per-step energy/variance summaries of an ensemble run.

    energy[n] uses ensemble means, variance_energy[n] the ensemble variances,
    equil_sq[n] = sum_i (E[b u - v])^2 dx, and v_n[n] the squared step
    variation of the means. grad_energy is the difference-quotient energy of
    the initial data.
    """

    energy: np.ndarray
    variance_energy: np.ndarray
    equil_sq: np.ndarray
    v_n: np.ndarray
    grad_energy: float
    dx: float


def initial_energy(u0: np.ndarray, v0: np.ndarray, a: float, b: float, dx: float) -> float:
    return float(np.sum((a - b * b) * u0**2 + (b * u0 - v0) ** 2) * dx)


def initial_gradient_energy(u0: np.ndarray, v0: np.ndarray, a: float, b: float, dx: float) -> float:
    du = (np.roll(u0, -1) - u0) / dx
    dv = (np.roll(v0, -1) - v0) / dx
    return float(np.sum((a - b * b) * du**2 + (b * du - dv) ** 2) * dx)


def compute_diagnostics(u_samples: np.ndarray, v_samples: np.ndarray, a: float, b: float,
                        dx: float) -> Tuple[float, float, float]:
    """(energy of means, variance energy, equilibrium-deviation square) for one snapshot.

    u_samples, v_samples have shape (n_samples, n_cells); variance terms need
    at least two samples.
    """
    if a < b * b:
        raise ConfigurationError("diagnostics assume the subcharacteristic condition a >= b^2")
    u_samples = np.atleast_2d(u_samples)
    v_samples = np.atleast_2d(v_samples)
    if u_samples.shape[0] < 2:
        raise ValueError("need at least 2 samples for variance diagnostics")
    mu = u_samples.mean(axis=0)
    mv = v_samples.mean(axis=0)
    energy = float(np.sum((a - b * b) * mu**2 + (b * mu - mv) ** 2) * dx)
    var_u = u_samples.var(axis=0, ddof=1)
    var_bu_v = (b * u_samples - v_samples).var(axis=0, ddof=1)
    variance_energy = float(np.sum((a - b * b) * var_u + var_bu_v) * dx)
    equil_sq = float(np.sum((b * mu - mv) ** 2) * dx)
    return energy, variance_energy, equil_sq


def ensemble_diagnostics(problem: RelaxationProblem, level: LevelSpec, mode: str,
                         n_samples: int, key: SampleKey) -> JinXinDiagnostics:
    """Evolve an ensemble and record the diagnostic scalars after every step.

    Deterministic mode runs a single trajectory (variance terms are zero).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    nu = problem.cfl_number(level)
    p = problem.relax_weight(level.dt)
    a, b = problem.a, problem.b
    sqa = np.sqrt(a)
    x = problem.hierarchy.nodes(level.level_index)
    u0, v0 = problem.initial_state(x)
    n = 1 if mode == "deterministic" else int(n_samples)
    u = np.tile(u0, (n, 1))
    v = np.tile(v0, (n, 1))
    gen = key.generator()
    nt = level.n_steps
    dx = level.dx
    energy = np.empty(nt)
    var_energy = np.empty(nt)
    equil = np.empty(nt)
    v_n = np.empty(nt)
    for step in range(nt):
        mu, mvv = u.mean(axis=0), v.mean(axis=0)
        dmu = np.roll(mu, -1) - mu
        dmv = np.roll(mvv, -1) - mvv
        v_n[step] = float(np.sum((a - b * b) * dmu**2 + (b * dmu - dmv) ** 2))
        rho = sqa * u + v
        ell = sqa * u - v
        if mode == "fully_random":
            xi = gen.random((n, u.shape[1]))
            eta = gen.random((n, u.shape[1]))
            rho = np.where(xi < nu, np.roll(rho, 1, axis=1), rho)
            ell = np.where(eta < nu, np.roll(ell, -1, axis=1), ell)
        else:
            rho = (1.0 - nu) * rho + nu * np.roll(rho, 1, axis=1)
            ell = (1.0 - nu) * ell + nu * np.roll(ell, -1, axis=1)
        u = (rho + ell) / (2.0 * sqa)
        v_half = (rho - ell) / 2.0
        if mode == "deterministic":
            v = p * v_half + (1.0 - p) * b * u
        else:
            zeta = gen.random((n, u.shape[1]))
            v = np.where(zeta < p, v_half, b * u)
        mu, mvv = u.mean(axis=0), v.mean(axis=0)
        energy[step] = float(np.sum((a - b * b) * mu**2 + (b * mu - mvv) ** 2) * dx)
        equil[step] = float(np.sum((b * mu - mvv) ** 2) * dx)
        if n >= 2:
            var_u = u.var(axis=0, ddof=1)
            var_bu_v = (b * u - v).var(axis=0, ddof=1)
            var_energy[step] = float(np.sum((a - b * b) * var_u + var_bu_v) * dx)
        else:
            var_energy[step] = 0.0
    return JinXinDiagnostics(
        energy=energy,
        variance_energy=var_energy,
        equil_sq=equil,
        v_n=v_n,
        grad_energy=initial_gradient_energy(u0, v0, a, b, dx),
        dx=dx,
    )
