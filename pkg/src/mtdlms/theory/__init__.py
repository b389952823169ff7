"""Closed-form performance models: mean, mean-square and steady-state behavior."""

from .analysis import (OrderingComparison, compare_orderings, grid_transient_msd,
                       initial_error, mean_curve, network_metric, star_relative_curves,
                       steady_second_moment, steady_state_msd, steady_state_star_msd,
                       transient_msd, transient_msd_schedule)
from .blockops import block_kron, bvec, commutation_blocks, spectral_radius, unbvec
from .models import (F_MAX_SIZE, Layout, LinearErrorModel, MeanModel, VarianceModel,
                     build_F_approx, build_F_exact, build_F_operator, competing_models,
                     error_model, monte_carlo_F)

__all__ = [
    "OrderingComparison", "compare_orderings", "grid_transient_msd", "initial_error",
    "mean_curve", "network_metric", "star_relative_curves", "steady_second_moment",
    "steady_state_msd", "steady_state_star_msd", "transient_msd", "transient_msd_schedule",
    "block_kron", "bvec",
    "commutation_blocks", "spectral_radius", "unbvec", "F_MAX_SIZE", "Layout",
    "LinearErrorModel", "MeanModel", "VarianceModel", "build_F_approx", "build_F_exact",
    "build_F_operator", "competing_models", "error_model", "monte_carlo_F",
]
