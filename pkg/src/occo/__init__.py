"""Online convex-concave optimization: implicit and optimistic mirror descent-ascent
with adaptive learning rates, synthetic time-varying games, metrics and certificates."""

from .domain import (
    Box,
    DimensionError,
    Regularizer,
    RegularizerConstants,
    StrategyPair,
    bregman,
    derive_constants,
    project,
)
from .environments import Environment, competitor_at, payoff_at, saddle_at
from .harness import ExperimentConfig, RunTrace, compare_runs, emit_csv, run_experiment, verify_csv
from .learners import (
    IOMDA,
    Doubling,
    LagPredictor,
    NeIOMDA,
    NeOptIOMDA,
    OptIOMDA,
    doubling_wrap,
    iomda_ne_round,
    iomda_round,
    make_learner,
    optiomda_ne_round,
    optiomda_round,
)
from .metrics import (
    MetricsAccumulator,
    bound_certificate,
    dual_gap_increment,
    ne_regret,
    residual_increment,
    tracking_error_increment,
)
from .payoff import Payoff, bilinear, custom, gradient_bounds, partials, quadratic_from_saddle, rho_distance, zero_payoff
from .saddle import (
    SolverConfig,
    SolverError,
    best_response_max,
    best_response_min,
    grid_oracle_saddle,
    prox_max,
    prox_min,
    solve_regularized_saddle,
)

__version__ = "0.1.0"
