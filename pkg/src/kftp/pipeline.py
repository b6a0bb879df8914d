"""End-to-end glue: normalize, denoise, fit, and score predictors on a test split."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import kalman, mlr
from .errors import TooFewRowsError, UnknownPredictorError
from .metrics import EvalReport, mae, r2_score
from .predictors import PREDICTOR_NAMES, make_predictor, rolling_predictions
from .preprocess import FilteredTrace, NoiseModel, estimate_noise, moving_average_filter
from .trace_io import NormalizationParams, ThroughputTrace, normalize

DEFAULT_FEATURES = ("rsrp", "sinr")


@dataclass(frozen=True)
class FitResult:
    model: mlr.RegressionModel
    noise: NoiseModel
    filtered: FilteredTrace
    fit_time: float


def select_features(trace: ThroughputTrace, wanted=DEFAULT_FEATURES) -> tuple[str, ...]:
    """Requested features that every sample of ``trace`` carries."""
    avail = trace.available_features
    return tuple(f for f in wanted if f in avail)


def fit_trace(train: ThroughputTrace, window: int, lead: int, features=DEFAULT_FEATURES) -> FitResult:
    """Fit normalization, noise variance and the regression on a raw training trace."""
    t0 = time.perf_counter()
    names = select_features(train, features)
    need = len(names) + 3
    if len(train) - lead < need:
        # checked up front so short traces fail here rather than inside the filter or scaler
        raise TooFewRowsError(
            f"training split has {len(train)} samples; a lead of {lead} with {len(names)} "
            f"feature(s) needs at least {need + lead}"
        )
    params = NormalizationParams.fit(_restrict(train, names))
    train_n, _ = normalize(_restrict(train, names), params)
    filtered = moving_average_filter(train_n.throughput, window)
    noise = estimate_noise(filtered)
    model = mlr.fit(
        filtered.true_throughput,
        train_n.features(names),
        lead,
        sigma2_M=noise.sigma2_M,
        feature_names=names,
        normalization=params,
        filter_window=window,
    )
    return FitResult(model, noise, filtered, time.perf_counter() - t0)


def _restrict(trace: ThroughputTrace, names) -> ThroughputTrace:
    """Drop feature columns outside ``names`` so they are neither normalized nor validated."""
    drop = {f: None for f in ("rsrp", "sinr", "rsrq", "speed") if f not in names}
    if not drop:
        return trace
    return replace(trace, samples=tuple(replace(s, **drop) for s in trace.samples))


@dataclass
class EvalOutcome:
    report: EvalReport
    truth: np.ndarray
    predicted: np.ndarray
    measured: np.ndarray
    warmup: np.ndarray


def evaluate(
    model: mlr.RegressionModel,
    test: ThroughputTrace,
    predictors=("kftp", "mlr"),
    *,
    include_warmup: bool = False,
    fit_time: float = 0.0,
    dataset: str = "",
    predictor_options: dict | None = None,
) -> dict[str, EvalOutcome]:
    """Score predictors on a raw test trace in the normalized domain.

    Ground truth is the moving-average-filtered test throughput. Every
    predictor forecasts sample ``n`` from data up to ``n - L``; the first
    ``L`` samples have no such forecast and are skipped unless
    ``include_warmup``, in which case they score the measured value.
    """
    for name in predictors:
        if name not in PREDICTOR_NAMES:
            raise UnknownPredictorError(
                f"unknown predictor {name!r}; valid names: {', '.join(PREDICTOR_NAMES)}"
            )
    params = model.normalization
    L = model.lead
    names = model.feature_set
    test_n, _ = normalize(_restrict(test, names), params) if params else (test, None)
    measured = test_n.throughput
    U = test_n.features(names)
    truth = moving_average_filter(measured, model.filter_window or 1).true_throughput
    warm = np.zeros(measured.size, bool)
    warm[:L] = True
    options = predictor_options or {}

    out = {}
    for name in predictors:
        t0 = time.perf_counter()
        if name == "kftp":
            pred = kalman.run(model, measured, U if names else None).predicted.copy()
        elif name == "mlr":
            pred = np.empty(measured.size)
            pred[L:] = mlr.predict_many(model, measured[:-L], U[:-L])
        else:
            raw = rolling_predictions(make_predictor(name, **options.get(name, {})), test.throughput, lead=L)
            pred = params.scale(raw) if params else raw
        elapsed = time.perf_counter() - t0
        pred[:L] = measured[:L]
        mask = np.ones(measured.size, bool) if include_warmup else ~warm
        report = EvalReport(
            r2=r2_score(truth[mask], pred[mask]),
            mae=mae(truth[mask], pred[mask]),
            n_samples=int(mask.sum()),
            lead_L=L,
            filter_F=model.filter_window or 1,
            fit_time=fit_time,
            predict_time=elapsed / measured.size,
            predictor=name,
            dataset=dataset,
        )
        out[name] = EvalOutcome(report, truth, pred, measured, warm)
    return out
