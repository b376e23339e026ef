"""Multilevel Monte Carlo laboratory for 1-D hyperbolic problems with random inputs."""

from .levels import (
    ConfigurationError,
    FieldSolution,
    GridHierarchy,
    LevelSpec,
    build_hierarchy,
    pair_cost,
    restrict_field,
    solution_cost,
)
from .random_inputs import (
    ParameterPath,
    SampleKey,
    SeedArray,
    coarsen_seeds_time,
    coarsen_seeds_spacetime,
    draw_seeds,
    seeds_to_path,
)
from .solvers import (
    AdvectionProblem,
    EulerProblem,
    ShallowWaterProblem,
    SolverFailure,
    StabilityError,
    advection_exact,
    solve_advection,
    solve_euler,
    solve_shallow_water,
)
from .relaxation import (
    JinXinDiagnostics,
    JinXinState,
    RelaxationProblem,
    apmc_convection_sample,
    apmc_relaxation_sample,
    apmc_solve,
    asymptotic_limit_solve,
    compute_diagnostics,
    ensemble_diagnostics,
    jinxin_deterministic_step,
    make_state,
    mlapmc_coupled_pair,
)
from .estimators import (
    AllocationPlan,
    FieldStats,
    LevelStats,
    accumulate,
    correction_sample,
    mc_allocation,
    optimal_allocation,
    solution_sample,
    stopping_mc,
    stopping_mlmc,
)
from .cases import (
    AdvectionCase,
    EulerCase,
    RandomChoiceCase,
    ShallowWaterCase,
    SyntheticCase,
    paper_wave,
    smooth_wave,
)
from .drivers import EstimatorReport, LevelReport, RunAborted, measure_level_stats, run_mc, run_mlmc
from .analysis import (
    CostPrediction,
    RateFit,
    classify_regime,
    fit_cost_slope,
    fit_rate,
    predict_mc_cost,
    predict_mlmc_cost,
)

__version__ = "0.1.0"
