"""Asymptotics of robust linear regression with outliers.

Theory (state evolution, Bayes-optimal baselines, closed-form expansions)
and finite-size validation (direct ERM solvers, GAMP, seed-averaged
Monte-Carlo), plus a CLI that tabulates the headline curves.
"""

__version__ = "0.1.0"

from .asymptotics import (
    ExpansionCoefficients,
    LeadingOrderState,
    estim_consistency_negative_reg,
    gen_consistency_condition,
    large_alpha_l2,
    large_alpha_leading,
    optimal_lambda1_estim,
    optimal_lambda1_gen,
    ridge_negative_lambda_bound,
    small_eps_expansion,
)
from .bayes_optimal import BOState, bo_errors, bo_fixed_point, bo_rate_coefficient
from .exceptions import (
    ConvergenceError,
    InvalidStateError,
    OptimizationError,
    QuadratureError,
    RobustAsympError,
    SolverError,
)
from .hyperopt import DIVERGED, HyperOptResult, nelder_mead, optimize_hyperparams
from .model import (
    Dataset,
    ErrorReport,
    OutlierModel,
    OverlapState,
    empirical_errors,
    errors_from_overlaps,
    estim_error_from_overlaps,
    excess_gen_error_from_overlaps,
    gen_error_from_overlaps,
    rng_for,
    sample_dataset,
    teacher_student_angle,
)
from .simulation import (
    GampConfig,
    GampState,
    McSummary,
    bo_channel_pair,
    bo_prior_pair,
    erm_convex,
    erm_ridge,
    gamp,
    run_monte_carlo,
)
from .state_evolution import (
    ChannelConstants,
    FixedPointConfig,
    LossSpec,
    channel_constants,
    quadrature_hat_updates,
    ridge_explicit,
    solve_fixed_point,
    update_hats_huber,
    update_hats_l1,
    update_hats_l2,
    update_nonhats,
)

__all__ = [
    "__version__",
    "BOState",
    "ChannelConstants",
    "ConvergenceError",
    "DIVERGED",
    "Dataset",
    "ErrorReport",
    "ExpansionCoefficients",
    "FixedPointConfig",
    "GampConfig",
    "GampState",
    "HyperOptResult",
    "InvalidStateError",
    "LeadingOrderState",
    "LossSpec",
    "McSummary",
    "OptimizationError",
    "OutlierModel",
    "OverlapState",
    "QuadratureError",
    "RobustAsympError",
    "SolverError",
    "bo_channel_pair",
    "bo_errors",
    "bo_fixed_point",
    "bo_prior_pair",
    "bo_rate_coefficient",
    "channel_constants",
    "empirical_errors",
    "erm_convex",
    "erm_ridge",
    "errors_from_overlaps",
    "estim_consistency_negative_reg",
    "estim_error_from_overlaps",
    "excess_gen_error_from_overlaps",
    "gamp",
    "gen_consistency_condition",
    "gen_error_from_overlaps",
    "large_alpha_l2",
    "large_alpha_leading",
    "nelder_mead",
    "optimal_lambda1_estim",
    "optimal_lambda1_gen",
    "optimize_hyperparams",
    "quadrature_hat_updates",
    "ridge_explicit",
    "ridge_negative_lambda_bound",
    "rng_for",
    "run_monte_carlo",
    "sample_dataset",
    "small_eps_expansion",
    "solve_fixed_point",
    "teacher_student_angle",
    "update_hats_huber",
    "update_hats_l1",
    "update_hats_l2",
    "update_nonhats",
]
