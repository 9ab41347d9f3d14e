"""Locally induced Gaussian process regression."""

from ligp._core import (
    DegenerateGeometry,
    DegenerateUpdate,
    IllConditioned,
    InducedState,
    ParseError,
    Template,
    borehole,
    borehole_bounds,
    build_wimse_template,
    chr_points,
    cross_kernel,
    herbies_tooth,
    lhs,
    predict,
    qnorm_points,
    rmse,
    rmspe,
    run_experiment,
    theta0_quantile,
    validate,
    wimse_design,
)

__all__ = [
    "DegenerateGeometry",
    "DegenerateUpdate",
    "IllConditioned",
    "InducedState",
    "ParseError",
    "Template",
    "borehole",
    "borehole_bounds",
    "build_wimse_template",
    "chr_points",
    "cross_kernel",
    "herbies_tooth",
    "lhs",
    "predict",
    "qnorm_points",
    "rmse",
    "rmspe",
    "run_experiment",
    "theta0_quantile",
    "validate",
    "wimse_design",
]
