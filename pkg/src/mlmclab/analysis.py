"""Rate fitting and the cost complexity predictors with regime classification.

Rates are log-slopes versus level, normalized so a quantity behaving like
dt_l**r fits to rate r. Cost predictions follow the three-branch complexity
bounds for the multilevel and single-level estimators; only exponents and
logarithmic powers are predicted, never constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class RateFit:
    rate: float
    intercept: float
    residual: float
    levels_used: int


@dataclass
class CostPrediction:
    regime_branch: str
    exponent: float
    log_power: int


def fit_rate(values_per_level, gamma: int, levels=None) -> RateFit:
    """Least-squares decay order in dt of positive per-level values.

    values[l] ~ C * dt_l**rate = C * Gamma**(-rate*l), so the fitted log-slope
    divided by -log(Gamma) is the decay order.
    """
    v = np.asarray(values_per_level, dtype=np.float64)
    if v.size < 3:
        raise ValueError("need at least 3 levels for a rate fit")
    if np.any(v <= 0):
        raise ValueError("rate fit requires positive values")
    ls = np.arange(v.size, dtype=np.float64) if levels is None else np.asarray(levels, np.float64)
    logs = np.log(v)
    slope, intercept = np.polyfit(ls, logs, 1)
    resid = np.max(np.abs(logs - (slope * ls + intercept)))
    return RateFit(rate=-slope / math.log(gamma), intercept=intercept, residual=float(resid),
                   levels_used=int(v.size))


def fit_cost_slope(deltas, costs) -> float:
    """Slope of log cost versus log delta (negative for growing cost)."""
    d = np.asarray(deltas, dtype=np.float64)
    c = np.asarray(costs, dtype=np.float64)
    slope, _ = np.polyfit(np.log(d), np.log(c), 1)
    return float(slope)


def _validate(alpha: float, gamma_exp: float, beta: float):
    if alpha <= 0 or gamma_exp <= 0:
        raise ValueError("alpha and gamma must be positive")
    if 2 * alpha < gamma_exp:
        raise ValueError("complexity bounds assume 2*alpha >= gamma")
    if beta < 0:
        raise ValueError("variance decay order must be nonnegative")


def predict_mlmc_cost(alpha: float, beta: float, gamma_exp: float) -> CostPrediction:
    """Multilevel cost branch: delta^-2 (beta>gamma), delta^-2 log^2 (beta=gamma),
    delta^-(2+(gamma-beta)/alpha) (beta<gamma; beta=0 taken as the limit)."""
    _validate(alpha, gamma_exp, beta)
    if beta > gamma_exp:
        return CostPrediction("beta_gt_gamma", 2.0, 0)
    if beta == gamma_exp:
        return CostPrediction("beta_eq_gamma", 2.0, 2)
    return CostPrediction("beta_lt_gamma", 2.0 + (gamma_exp - beta) / alpha, 0)


def predict_mc_cost(alpha: float, beta0: float, gamma_exp: float) -> CostPrediction:
    """Single-level cost branch: delta^-2, delta^-2 log, or delta^-(2+(gamma-beta0)/alpha)."""
    _validate(alpha, gamma_exp, beta0)
    if beta0 > gamma_exp:
        return CostPrediction("beta_gt_gamma", 2.0, 0)
    if beta0 == gamma_exp:
        return CostPrediction("beta_eq_gamma", 2.0, 1)
    return CostPrediction("beta_lt_gamma", 2.0 + (gamma_exp - beta0) / alpha, 0)


def classify_regime(beta0_fit: float, beta_fit: float, tol: float = 0.25) -> str:
    """I: corrections decay but solutions do not; II: both decay at the same
    positive order; III: neither decays. Anything else is 'indeterminate'."""
    if max(beta_fit, beta0_fit) <= tol:
        return "III"
    if beta_fit - beta0_fit > tol and beta0_fit <= tol:
        return "I"
    if abs(beta_fit - beta0_fit) <= tol and beta0_fit > tol:
        return "II"
    return "indeterminate"
