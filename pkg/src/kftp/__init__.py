"""Kalman-filter-based throughput prediction and trace-driven ABR simulation."""

from .errors import DataError, KftpError, NumericalError, UsageError
from .kalman import KftpFilter, PredictionSeries, run
from .metrics import EvalReport, mae, r2_gain, r2_score
from .mlr import FeatureVector, RegressionModel, fit, predict
from .predictors import PREDICTOR_NAMES, make_predictor
from .preprocess import FilteredTrace, NoiseModel, estimate_noise, moving_average_filter
from .trace_io import ColumnMapping, NormalizationParams, ThroughputTrace, load_trace, normalize

__version__ = "0.1.0"

__all__ = [
    "ColumnMapping",
    "DataError",
    "EvalReport",
    "FeatureVector",
    "FilteredTrace",
    "KftpError",
    "KftpFilter",
    "NoiseModel",
    "NormalizationParams",
    "NumericalError",
    "PREDICTOR_NAMES",
    "PredictionSeries",
    "RegressionModel",
    "ThroughputTrace",
    "UsageError",
    "estimate_noise",
    "fit",
    "load_trace",
    "mae",
    "make_predictor",
    "moving_average_filter",
    "normalize",
    "predict",
    "r2_gain",
    "r2_score",
    "run",
]
