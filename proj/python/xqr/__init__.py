"""Penalized B-spline quantile regression, Hill-type tail index and extrapolation."""

from ._core import (
    Basis,
    Ladder,
    Model,
    SolverConfig,
    XqrError,
    base_level_index,
    classify_regime,
    default_k,
    default_lambda_grid,
    estimate_evi,
    eta_for_xi,
    evi_sample_path,
    extrapolate_pointwise,
    extrapolate_pooled,
    fit,
    fit_ladder,
    floor_power,
    gacv,
    generate,
    hill,
    mise,
    pinball,
    run_study,
    smoothed_pinball,
    true_quantile,
    weissman_factor,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
