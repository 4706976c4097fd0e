"""Conditional kernel density estimation with autocorrelated residuals.

Public surface: kernel primitives, smoothers, bandwidth selectors, the
AR-residual machinery, the DEAR estimator with one-step-ahead forecasts,
predictive-density evaluation, forecast metrics, comparison baselines,
dataset handling, and a synthetic generator with exact ground truth.
"""

from ._backend import BACKEND
from .bandwidth import (BandwidthReport, adaptive_bandwidths,
                        dpi_density_bandwidth, dpi_regression_bandwidth,
                        rule_of_thumb_bandwidth)
from .baselines import amk_density, aml_mean, kdes_weights, persistence
from .backtest import BacktestResult, run_backtest
from .data import (CsvSchema, Dataset, FilterRules, RunConfig, clamp,
                   filter_idle, ingest_csv, rolling_windows, serialize_dataset)
from .density import PredictiveDensity, cdf, gaussian_cdf, pdf, quantile
from .estimator import (DearModel, Forecast, conditional_mean, fit,
                        fit_initial, forecast, iterate, load_model,
                        save_model, update)
from .kernels import (KernelConfig, VariableKind, amk_weight, bessel_i0,
                      gaussian_kernel, log_bessel_i0, make_groups,
                      multiplicative_kernel, von_mises_kernel)
from .metrics import (MetricsReport, coverage_dev, crps, evaluate, pinaw,
                      rmse)
from .smooth import (SmootherFit, SmootherMethod, input_density,
                     local_linear_mean, nw_mean, nw_weights, predict,
                     variance_smoother)
from .synth import SynthSpec, generate
from .tseries import (ArFit, LjungBoxResult, acf, chisq_cdf, fit_ar_ls,
                      ljung_box, select_order)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "__version__",
    "BandwidthReport", "adaptive_bandwidths", "dpi_density_bandwidth",
    "dpi_regression_bandwidth", "rule_of_thumb_bandwidth",
    "amk_density", "aml_mean", "kdes_weights", "persistence",
    "BacktestResult", "run_backtest",
    "CsvSchema", "Dataset", "FilterRules", "RunConfig", "clamp",
    "filter_idle", "ingest_csv", "rolling_windows", "serialize_dataset",
    "PredictiveDensity", "cdf", "gaussian_cdf", "pdf", "quantile",
    "DearModel", "Forecast", "conditional_mean", "fit", "fit_initial",
    "forecast", "iterate", "load_model", "save_model", "update",
    "KernelConfig", "VariableKind", "amk_weight", "bessel_i0",
    "gaussian_kernel", "log_bessel_i0", "make_groups",
    "multiplicative_kernel", "von_mises_kernel",
    "MetricsReport", "coverage_dev", "crps", "evaluate", "pinaw", "rmse",
    "SmootherFit", "SmootherMethod", "input_density", "local_linear_mean",
    "nw_mean", "nw_weights", "predict", "variance_smoother",
    "SynthSpec", "generate",
    "ArFit", "LjungBoxResult", "acf", "chisq_cdf", "fit_ar_ls",
    "ljung_box", "select_order",
]
