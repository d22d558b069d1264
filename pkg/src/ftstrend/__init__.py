"""Trend estimation, removal, and forecasting for functional time series.

The trend surface of a sequence of curves is modeled as a penalized
tensor-product B-spline with separate roughness penalties along the curve
coordinate and along time, smoothing parameters selected by REML on
marginal data reductions. The package also ships the competitor
estimators, the Monte Carlo benchmark, and the score-based forecasting
pipelines used to evaluate the approach.
"""

from .baselines import BaselineFit, baseline_values, eval_baseline, fit_kernel, fit_linear, fit_naive
from .evaluation import (
    BenchmarkReport,
    BenchmarkRow,
    OperatorKernelFit,
    SurfaceEstimate,
    default_estimators,
    fit_far_kernel,
    ise_beta,
    ise_trend,
    kernel_values,
    run_benchmark,
    truth_estimator,
)
from .forecast_pipeline import (
    ForecastComparison,
    ForecastConfig,
    FPCAModel,
    ScoreModel,
    compare_forecasts,
    fit_score_model,
    forecast_scores,
    forecast_with_trend,
    forecast_without_trend,
    fpca,
)
from .fts_sim import (
    FARProcessSpec,
    TrendSurface,
    brownian_path,
    calibrate_c1,
    eval_trend_surface,
    gaussian_ridge_kernel,
    simulate_far1,
    simulate_scenario,
    trend_surface_matrix,
)
from .smoothing import (
    MarginalProfile,
    SmoothingError,
    SmoothingSelection,
    joint_lambda_scales,
    penalized_fit,
    reml_select,
    s_margin,
    select_lambdas,
    t_margin,
)
from .splines import BasisMatrices, BSplineBasis, eval_basis, gram_and_penalty, make_basis
from .tensor_trend import (
    GridFunctionSeries,
    TrendFit,
    TrendFitError,
    detrend,
    eval_trend,
    fit_trend,
    forecast_trend,
    trend_time_derivative,
)

__version__ = "0.1.0"
