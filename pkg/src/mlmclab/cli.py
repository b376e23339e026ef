"""Experiment runner: case presets, delta sweeps, output tables, invariant checks.

`run` executes the configured cases: a fixed-size variance study per level
(rates, regime classification) and adaptive MC/MLMC runs over the delta sweep
(cost tables). `validate` runs the reduced-scale invariant suite and exits
nonzero on any hard failure. All outputs are deterministic given the config.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import analysis, relaxation, solvers
from .cases import (
    AdvectionCase,
    EulerCase,
    RandomChoiceCase,
    ShallowWaterCase,
    paper_wave,
    smooth_wave,
    zero_profile,
)
from .drivers import measure_level_stats, run_mc, run_mlmc
from .estimators import optimal_allocation
from .levels import build_hierarchy, restrict_field
from .random_inputs import SampleKey, SeedArray, coarsen_seeds_time, coarsen_seeds_spacetime, draw_seeds


def wave_4_1(x):
    """Case 4.1 profile: the third harmonic carries enough curvature bias to
    drive the level ladder across the delta sweep without inflating the
    variance (see decisions ledger)."""
    return 0.5 + 0.26 * np.sin(np.pi * x) + 0.07 * np.sin(3 * np.pi * x)


def wave_4_2(x):
    return 0.5 + 0.25 * np.sin(np.pi * x)


def wave_7x(x):
    """Zero-mean profile for the random-choice cases; a mean offset feeds O(1)
    relaxation-choice variance through the v-equation."""
    return 0.07 * np.sin(np.pi * x)


PROFILES = {
    "smooth": smooth_wave,
    "paper": paper_wave,
    "wave_4_1": wave_4_1,
    "wave_4_2": wave_4_2,
    "wave_7x": wave_7x,
    "zero": zero_profile,
}

PAPER_DELTAS = [0.02, 0.01, 0.005, 0.002, 0.001]


def preset_config(case_id: str) -> dict:
    """Configuration shipped for the eight study cases (paper parameter sets;
    deviations recorded in the decisions ledger)."""
    if case_id in ("4.1", "4.1b", "4.2"):
        cfg = {
            "family": "advection",
            "domain": [-1.0, 1.0],
            "t_final": 1.0,
            "gamma": 2,
            "dx0": 1.0 / 32.0,
            "kappa": 0.5,
            "max_level": 8,
            "n_initial": 500,
            "a_mean": 1.0,
            "amplitude": 1.0,
            "deltas": PAPER_DELTAS,
            "study": {"levels": 5, "samples": 1000},
        }
        if case_id == "4.1":
            cfg.update(K=1, initial="wave_4_1")
        elif case_id == "4.1b":
            cfg.update(K=32, initial="wave_4_1")
        else:
            cfg.update(K=0, initial="wave_4_2")  # K=0: white noise in time
        return cfg
    if case_id in ("5.1", "5.2"):
        return {
            "family": "euler",
            "domain": [0.0, 2.0],
            "t_final": 2.0,
            "gamma": 2,
            "dx0": 0.25,
            "kappa": 0.1,
            "max_level": 8,
            "n_initial": 500,
            "gravity": 0.1,
            "A0": 1.0,
            "lam_mean": 4.0 / 3.0,
            "amplitude": 1.0 / 3.0,
            "K": 1 if case_id == "5.1" else 0,
            "deltas": [0.02, 0.01, 0.005],
            "study": {"levels": 5, "samples": 500},
        }
    if case_id in ("6.1", "6.2"):
        return {
            "family": "shallow_water",
            "domain": [0.0, 1.0],
            "t_final": 0.1,
            "gamma": 2,
            "dx0": 1.0 / 64.0,
            "kappa": 0.05,
            "max_level": 8,
            "n_initial": 500,
            "gravity": 1.0,
            "K": 1 if case_id == "6.1" else 0,
            "deltas": [0.02, 0.01, 0.005],
            "study": {"levels": 5, "samples": 500},
        }
    if case_id in ("7.1", "7.2"):
        return {
            "family": "random_choice",
            "domain": [-1.0, 1.0],
            "t_final": 1.0,
            "gamma": 2,
            "dx0": 1.0 / 32.0,
            "kappa": 0.5,  # nu = sqrt(a)*kappa = 1/2
            "max_level": 8,
            "n_initial": 500,
            "a": 1.0,
            "b": 2.0,
            "epsilon": 1.0,
            "mode": "semi_random" if case_id == "7.1" else "fully_random",
            "initial": "wave_7x",
            # cost sweeps run on a coarser base grid and stop at delta=0.002
            # to stay desk-scale on one CPU; the variance study keeps the
            # paper grid (ledger)
            "deltas": [0.02, 0.01, 0.005, 0.002],
            "cost_dx0": 1.0 / 8.0,
            "study": {"levels": 5, "samples": 500},
        }
    raise ValueError(f"unknown case id {case_id!r}")


def default_config() -> dict:
    return {
        "master_seed": 7071,
        "cases": {cid: preset_config(cid) for cid in
                  ("4.1", "4.1b", "4.2", "5.1", "5.2", "6.1", "6.2", "7.1", "7.2")},
    }


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None) -> dict:
    cfg = default_config()
    if path is not None:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
        cfg = _merge(cfg, user)
    return cfg


def build_case(case_cfg: dict, dx0_override=None):
    """Construct the case object (and its hierarchy) from a config table."""
    family = case_cfg["family"]
    dx0 = dx0_override if dx0_override is not None else case_cfg["dx0"]
    hier = build_hierarchy(
        tuple(case_cfg["domain"]), case_cfg["t_final"], case_cfg["gamma"], dx0,
        case_cfg["kappa"], case_cfg["max_level"],
    )
    K = case_cfg.get("K", 0) or None
    if family == "advection":
        return AdvectionCase(hier, K=K, a_mean=case_cfg.get("a_mean", 1.0),
                             amplitude=case_cfg.get("amplitude", 1.0),
                             initial=PROFILES[case_cfg.get("initial", "smooth")])
    if family == "euler":
        return EulerCase(hier, K=K, gravity=case_cfg.get("gravity", 0.1),
                         A0=case_cfg.get("A0", 1.0),
                         lam_mean=case_cfg.get("lam_mean", 4.0 / 3.0),
                         amplitude=case_cfg.get("amplitude", 1.0 / 3.0))
    if family == "shallow_water":
        return ShallowWaterCase(hier, K=K, gravity=case_cfg.get("gravity", 1.0))
    if family == "random_choice":
        return RandomChoiceCase(hier, mode=case_cfg["mode"], a=case_cfg.get("a", 1.0),
                                b=case_cfg.get("b", 2.0), epsilon=case_cfg.get("epsilon", 1.0),
                                initial=PROFILES[case_cfg.get("initial", "wave_7x")])
    raise ValueError(f"unknown family {family!r}")


def run_case(case_id: str, case_cfg: dict, master_seed: int, methods, workers: int = 1,
             log=print):
    """Variance study plus delta sweep for one case; returns table rows."""
    study_cfg = case_cfg.get("study", {"levels": 5, "samples": 500})
    study_case = build_case(case_cfg)
    n_levels = int(study_cfg["levels"])
    n_samples = int(study_cfg["samples"])
    log(f"[{case_id}] variance study: levels 0..{n_levels - 1}, {n_samples} samples/level")
    stats = measure_level_stats(study_case, range(n_levels), n_samples, master_seed,
                                workers=workers)
    dx0 = study_case.hierarchy.dx0
    var_rows = []
    for ls in stats:
        var_rows.append({
            "case_id": case_id,
            "level": ls.level_index,
            "var_solution": ls.stats_solution.scalar_variance(dx0),
            "var_correction": ls.stats_correction.scalar_variance(dx0),
            "n_samples": ls.stats_correction.n,
        })
    v_sol = [r["var_solution"] for r in var_rows]
    v_corr = [r["var_correction"] for r in var_rows[1:]]
    y_norm = [ls.stats_correction.mean_norm(dx0) for ls in stats[1:]]
    beta0 = analysis.fit_rate(v_sol, study_case.hierarchy.gamma).rate
    beta = analysis.fit_rate(v_corr, study_case.hierarchy.gamma,
                             levels=range(1, n_levels)).rate
    try:
        alpha_fit = analysis.fit_rate(y_norm, study_case.hierarchy.gamma,
                                      levels=range(1, n_levels)).rate
    except ValueError:
        alpha_fit = float("nan")
    regime = analysis.classify_regime(beta0, beta)
    log(f"[{case_id}] beta0={beta0:.3f} beta={beta:.3f} regime={regime}")

    cost_case = (build_case(case_cfg, dx0_override=case_cfg["cost_dx0"])
                 if "cost_dx0" in case_cfg else study_case)
    deltas = sorted(case_cfg["deltas"], reverse=True)
    cost_rows = []
    for method in methods:
        runner = run_mc if method == "mc" else run_mlmc
        for delta in deltas:
            rep = runner(cost_case, delta, master_seed,
                         n_initial=int(case_cfg.get("n_initial", 500)), workers=workers)
            cost_rows.append({
                "case_id": case_id,
                "method": method,
                "delta": delta,
                "total_cost": rep.total_cost,
                "allocation_cost": rep.allocation_cost,
                "finest_level": rep.finest_level,
                "converged": rep.converged,
            })
            log(f"[{case_id}] {method} delta={delta}: L={rep.finest_level} "
                f"cost={rep.total_cost:.4g} alloc={rep.allocation_cost:.4g} "
                f"converged={rep.converged}")

    rates = {"alpha_fit": alpha_fit, "beta0_fit": beta0, "beta_fit": beta, "regime": regime}
    gamma_exp = 2.0
    for method in methods:
        rows = [r for r in cost_rows if r["method"] == method]
        fitted = analysis.fit_cost_slope([r["delta"] for r in rows],
                                         [r["allocation_cost"] for r in rows])
        rate = beta if method == "mlmc" else beta0
        pred = analysis.predict_from_fit(method, 1.0, rate, gamma_exp)
        rates[method] = {
            "fitted_slope": fitted,
            "predicted_exponent": pred.exponent,
            "predicted_log_power": pred.log_power,
        }
    return var_rows, cost_rows, rates


def _write_cost_csv(path: Path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "method", "delta", "total_cost", "allocation_cost",
                    "finest_level", "converged"])
        for r in rows:
            w.writerow([r["case_id"], r["method"], f"{r['delta']:.12g}",
                        f"{r['total_cost']:.12g}", f"{r['allocation_cost']:.12g}",
                        r["finest_level"], int(r["converged"])])


def _write_variance_csv(path: Path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "level", "var_solution", "var_correction", "n_samples"])
        for r in rows:
            w.writerow([r["case_id"], r["level"], f"{r['var_solution']:.12g}",
                        f"{r['var_correction']:.12g}", r["n_samples"]])


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, tomllib.TOMLDecodeError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    case_ids = [args.case] if args.case else sorted(cfg["cases"])
    for cid in case_ids:
        if cid not in cfg["cases"]:
            print(f"unknown case {cid!r}; configured: {sorted(cfg['cases'])}", file=sys.stderr)
            return 2
    methods = ["mc", "mlmc"] if args.method == "both" else [args.method]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    all_var, all_cost, all_rates = [], [], {}
    warned = False
    for cid in case_ids:
        var_rows, cost_rows, rates = run_case(cid, cfg["cases"][cid], cfg["master_seed"],
                                              methods, workers=args.workers)
        all_var.extend(var_rows)
        all_cost.extend(cost_rows)
        all_rates[cid] = rates
        if any(not r["converged"] for r in cost_rows):
            warned = True
    _write_cost_csv(out / "cost.csv", all_cost)
    _write_variance_csv(out / "variance.csv", all_var)
    meta = {"master_seed": cfg["master_seed"], "cases": all_rates}
    with open(out / "rates.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    if warned:
        print("warning: some runs hit the level cap without converging", file=sys.stderr)
    print(f"wrote {out / 'cost.csv'}, {out / 'variance.csv'}, {out / 'rates.json'}")
    return 0


def _check(report, name, ok, detail):
    report.append({"check": name, "passed": bool(ok), "detail": detail})
    return ok


def validate_invariants(master_seed: int = 7071) -> list:
    """Reduced-scale invariant suite; returns a list of check records."""
    from scipy import stats as sstats

    report = []
    # seed coarsening preserves the uniform law
    key = SampleKey(master_seed, 0, 1, "param")
    fine = draw_seeds(key, "time", 200_000)
    coarse = coarsen_seeds_time(fine, 2)
    p_t = sstats.kstest(coarse.values, "uniform").pvalue
    _check(report, "coarsen_time_uniform", p_t > 0.01, f"KS p={p_t:.4f}")
    fine2 = draw_seeds(key.with_stream("convection_rho"), "spacetime", (400, 400))
    coarse2 = coarsen_seeds_spacetime(fine2, 2)
    p_st = sstats.kstest(coarse2.values.ravel(), "uniform").pvalue
    _check(report, "coarsen_spacetime_uniform", p_st > 0.01, f"KS p={p_st:.4f}")

    # telescoping cancellation is exact for shared-seed pairs, and the check
    # itself must catch a broken restriction operator (mutation sanity)
    hier = build_hierarchy((-1, 1), 1.0, 2, 1 / 32, 0.5, 4)
    case = AdvectionCase(hier, K=1, initial=smooth_wave)
    key_adv = 12345

    def telescope_gap(stride_break: bool) -> float:
        gap = 0.0
        for sid in range(10):
            total = restrict_field(case.solution_sample(0, sid, key_adv), 0, 2).get("u")
            for l in (1, 2):
                f, c = case.coupled_pair(l, sid, key_adv)
                rf = restrict_field(f, 0, 2).get("u")
                rc = restrict_field(c, 0, 2).get("u")
                if stride_break:
                    rc = np.roll(rc, 1)  # deliberately broken operator
                total = total + rf - rc
            fin = restrict_field(case.solution_sample(2, sid, key_adv), 0, 2).get("u")
            gap = max(gap, float(np.abs(total - fin).max()))
        return gap

    _check(report, "telescoping_exact", telescope_gap(False) < 1e-12,
           f"max gap={telescope_gap(False):.3e}")
    _check(report, "telescoping_mutation_detected", telescope_gap(True) > 1e-6,
           "broken restriction must break telescoping")

    # advection exact shift and max principle
    lv = hier.level(0)
    from .random_inputs import ParameterPath
    path1 = ParameterPath("piecewise", 1, 1.0, 1.0, np.array([2.0]))
    sol = solvers.solve_advection(case.problem, lv, path1)  # nu = 1: exact transport
    x = hier.nodes(0)
    exact = smooth_wave(x - 2.0 * lv.t_final)
    _check(report, "advection_nu1_exact", float(np.abs(sol.get("u") - exact).max()) < 1e-12,
           "nu=1 transports exactly")
    rnd = case.solution_sample(0, 3, key_adv).get("u")
    u0 = smooth_wave(x)
    _check(report, "advection_max_principle",
           rnd.min() >= u0.min() - 1e-12 and rnd.max() <= u0.max() + 1e-12,
           f"range [{rnd.min():.4f}, {rnd.max():.4f}]")

    # Euler hydrostatic steady state
    hierE = build_hierarchy((0, 2), 2.0, 2, 0.25, 0.1, 4)
    g, lam = 0.1, 4.0 / 3.0
    Cst = 4.0 * 2.0 ** (1.0 / 3.0)

    def rho_eq(xx):
        return ((lam - 1.0) * (Cst - g * xx) / lam) ** (1.0 / (lam - 1.0))

    probE = solvers.EulerProblem(hierarchy=hierE, gravity=g, A0=1.0, lam0=lam, rho0=rho_eq)
    lvE = hierE.level(1)
    from .levels import LevelSpec
    lv100 = LevelSpec(1, lvE.dx, lvE.dt, lvE.n_cells, 100, lvE.cfl_ratio)
    frozen = ParameterPath("piecewise", 1, lam, 0.0, np.array([lam]))
    solE = solvers.solve_euler(probE, lv100, frozen)
    drift = float(np.abs(solE.get("mom") / solE.get("rho")).max())
    drho = float(np.abs(solE.get("rho") - rho_eq(hierE.centers(1))).max())
    _check(report, "euler_hydrostatic", drift < 1e-12 and drho < 1e-12,
           f"max|v|={drift:.2e}, max|drho|={drho:.2e}")

    # shallow-water lake at rest
    hierS = build_hierarchy((0, 1), 0.1, 2, 1 / 64, 0.05, 4)
    xf = hierS.nodes(0)
    b_weights = ParameterPath("piecewise", 1, 0.0, 1.0, np.array([0.7]))
    Csw = 8.0
    bc = 1.0 + 0.7 * np.sin(np.pi * hierS.centers(0))

    probS = solvers.ShallowWaterProblem(
        hierarchy=hierS, gravity=1.0,
        depth0=lambda xx: Csw - (1.0 + 0.7 * np.sin(np.pi * xx)),
        velocity0=zero_profile,
    )
    lvS = hierS.level(0)
    lv100s = LevelSpec(0, lvS.dx, lvS.dt, lvS.n_cells, 100, lvS.cfl_ratio)
    solS = solvers.solve_shallow_water(probS, lv100s, b_weights)
    w_face = solS.get("h")  # compare surface drift via depth change
    h0 = Csw - bc
    drift_h = float(np.abs(w_face - h0).max())
    drift_q = float(np.abs(solS.get("hu")).max())
    _check(report, "shallow_water_lake_at_rest", drift_h < 1e-12 and drift_q < 1e-12,
           f"max|dh|={drift_h:.2e}, max|q|={drift_q:.2e}")

    # relaxation: energy monotonicity and the stiff limit
    hierJ = build_hierarchy((-1, 1), 1.0, 2, 1 / 32, 0.25, 4)
    probJ = relaxation.RelaxationProblem(hierarchy=hierJ, a=4.0, b=1.0, epsilon=0.5,
                                         u0=smooth_wave)
    diag = relaxation.ensemble_diagnostics(probJ, hierJ.level(0), "deterministic", 1,
                                           SampleKey(master_seed, 0, 0, "param"))
    mono = bool(np.all(np.diff(diag.energy) <= 1e-12))
    _check(report, "relaxation_energy_monotone", mono,
           f"max increase={np.diff(diag.energy).max():.2e}")
    probJ0 = relaxation.RelaxationProblem(hierarchy=hierJ, a=4.0, b=1.0, epsilon=1e-8,
                                          u0=smooth_wave, v0=lambda xx: smooth_wave(xx))
    det = relaxation.apmc_solve(probJ0, hierJ.level(0), "deterministic",
                                SampleKey(master_seed, 0, 0, "param"))
    lim = relaxation.asymptotic_limit_solve(probJ0, hierJ.level(0))
    gap = float(np.sqrt(np.sum((det.get("u") - lim.get("u")) ** 2) * hierJ.dx0))
    _check(report, "relaxation_stiff_limit", gap < 1e-6, f"L2 gap={gap:.2e}")

    # allocation oracle (hand-evaluated optimal counts)
    plan = optimal_allocation([1.0, 0.25], [1.0, 4.0], 0.1)
    _check(report, "allocation_oracle",
           plan.mu == 400.0 and list(plan.n_per_level) == [400, 100],
           f"mu={plan.mu}, N={list(plan.n_per_level)}")
    return report


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, tomllib.TOMLDecodeError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    report = validate_invariants(cfg["master_seed"])
    print(json.dumps(report, indent=2))
    failed = [r["check"] for r in report if not r["passed"]]
    if failed:
        print(f"FAILED checks: {failed}", file=sys.stderr)
        return 1
    print(f"all {len(report)} invariant checks passed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mlmclab",
                                     description="Multilevel Monte Carlo laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run configured cases and write tables")
    p_run.add_argument("--config", default=None, help="TOML config (defaults to presets)")
    p_run.add_argument("--case", default=None, help="run a single case id")
    p_run.add_argument("--method", choices=["mc", "mlmc", "both"], default="both")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--out", default="results")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(func=cmd_run)
    p_val = sub.add_parser("validate", help="run the invariant checks")
    p_val.add_argument("--config", default=None)
    p_val.set_defaults(func=cmd_validate)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
