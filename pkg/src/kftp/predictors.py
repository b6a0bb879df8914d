"""Throughput predictors behind one observe/predict interface.

Stateful predictors consume raw throughput in bits/second and return
bits/second. Model-based predictors (``kftp``, ``mlr``) convert to and from
the model's normalized domain when the model carries normalization params.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from . import mlr
from .errors import (
    EmptyHistoryError,
    FeatureMismatchError,
    InvalidAlphaError,
    KftpError,
    NonPositiveThroughputError,
    UnknownPredictorError,
)
from .kalman import KftpFilter
from .mlr import FeatureVector, RegressionModel

PREDICTOR_NAMES = ("kftp", "mlr", "harmonic", "ewma", "persistence")


class NotWarmedUpError(EmptyHistoryError):
    pass


def harmonic_mean_predictor(history) -> float:
    h = len(history)
    if h == 0:
        raise EmptyHistoryError("harmonic mean of an empty history")
    if any(c <= 0 for c in history):
        raise NonPositiveThroughputError("harmonic mean needs strictly positive throughput samples")
    return h / sum(1.0 / c for c in history)


def ewma_predictor(history, alpha: float) -> float:
    """``s(n) = alpha*c(n) + (1-alpha)*s(n-1)`` seeded with ``s(0) = c(0)``."""
    if not 0 < alpha <= 1:
        raise InvalidAlphaError(f"alpha must lie in (0, 1], got {alpha!r}")
    if len(history) == 0:
        raise EmptyHistoryError("EWMA of an empty history")
    it = iter(history)
    s = float(next(it))
    for c in it:
        s = alpha * c + (1 - alpha) * s
    return s


def persistence_predictor(history) -> float:
    if len(history) == 0:
        raise EmptyHistoryError("persistence needs at least one observation")
    return float(history[-1])


def mlr_predictor(model: RegressionModel, measured: float, u=()) -> float:
    """Standalone regression forecast fed the *measured* present throughput."""
    return mlr.predict(model, FeatureVector(measured, tuple(u), model.feature_set))


class Predictor:
    """Base class: observe samples in time order, forecast the future."""

    name = "base"

    def observe(self, throughput: float, features=()) -> None:
        raise NotImplementedError

    def predict(self) -> float:
        raise NotImplementedError

    def forecast(self, horizon: int) -> list[float]:
        """Per-step throughput for the next ``horizon`` steps.

        Point predictors repeat their single estimate across the horizon.
        """
        p = self.predict()
        return [p] * horizon


class HarmonicMeanPredictor(Predictor):
    name = "harmonic"

    def __init__(self, window: int = 5, floor: float = 1.0):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.history = deque(maxlen=window)
        # outage samples of 0 bps would make the mean undefined
        self.floor = floor

    def observe(self, throughput, features=()):
        self.history.append(max(float(throughput), self.floor))

    def predict(self):
        return harmonic_mean_predictor(self.history)


class EwmaPredictor(Predictor):
    name = "ewma"

    def __init__(self, alpha: float = 0.25):
        if not 0 < alpha <= 1:
            raise InvalidAlphaError(f"alpha must lie in (0, 1], got {alpha!r}")
        self.alpha = alpha
        self.state: float | None = None

    def observe(self, throughput, features=()):
        c = float(throughput)
        self.state = c if self.state is None else self.alpha * c + (1 - self.alpha) * self.state

    def predict(self):
        if self.state is None:
            raise EmptyHistoryError("EWMA predictor has no observations yet")
        return self.state


class PersistencePredictor(Predictor):
    name = "persistence"

    def __init__(self):
        self.last: float | None = None

    def observe(self, throughput, features=()):
        self.last = float(throughput)

    def predict(self):
        if self.last is None:
            raise EmptyHistoryError("persistence predictor has no observations yet")
        return self.last


class _ModelPredictor(Predictor):
    def __init__(self, model: RegressionModel):
        self.model = model
        self.norm = model.normalization

    def _scale(self, throughput, features):
        if len(features) != len(self.model.feature_set):
            raise FeatureMismatchError(
                f"got {len(features)} feature values, model expects {self.model.feature_set}"
            )
        if self.norm is None:
            return float(throughput), tuple(float(v) for v in features)
        x = float(self.norm.scale(throughput))
        u = tuple(float(self.norm.scale(v, name)) for v, name in zip(features, self.model.feature_set))
        return x, u

    def _unscale(self, value):
        return float(value) if self.norm is None else float(self.norm.unscale(value))


class MlrPredictor(_ModelPredictor):
    name = "mlr"

    def __init__(self, model):
        super().__init__(model)
        self.current = None

    def observe(self, throughput, features=()):
        self.current = self._scale(throughput, features)

    def predict(self):
        if self.current is None:
            raise EmptyHistoryError("MLR predictor has no observations yet")
        x, u = self.current
        return self._unscale(mlr_predictor(self.model, x, u))


class KftpPredictor(_ModelPredictor):
    """Adapter over :class:`KftpFilter`.

    While the filter is still seeding itself (``n <= L``) the prediction is
    the latest measurement, mirroring the recursion's own initialization.
    """

    name = "kftp"

    def __init__(self, model):
        super().__init__(model)
        self.filter = KftpFilter(model)
        self.last_measured = None

    def observe(self, throughput, features=()):
        x, u = self._scale(throughput, features)
        self.last_measured = float(throughput)
        self.filter.step(x, u)

    @property
    def warmed_up(self) -> bool:
        return self.filter.n > self.filter.lead

    def predict(self):
        if self.filter.last is None:
            raise NotWarmedUpError("KFTP predictor has no observations yet")
        if not self.warmed_up:
            return self.last_measured
        return self._unscale(self.filter.last.predicted_ahead)


class OraclePredictor(Predictor):
    """Knows the actual future; an upper-bound reference for simulations."""

    name = "oracle"

    def __init__(self, actual):
        self.actual = [float(c) for c in actual]
        self.n = 0

    def observe(self, throughput, features=()):
        self.n += 1

    def predict(self):
        return self.actual[min(self.n, len(self.actual) - 1)]

    def forecast(self, horizon):
        end = len(self.actual) - 1
        return [self.actual[min(self.n + k, end)] for k in range(horizon)]


def make_predictor(name: str, model: RegressionModel | None = None, **options) -> Predictor:
    """Build a predictor by CLI/config name."""
    key = name.lower()
    if key == "harmonic":
        return HarmonicMeanPredictor(**options)
    if key == "ewma":
        return EwmaPredictor(**options)
    if key == "persistence":
        return PersistencePredictor()
    if key in ("kftp", "mlr"):
        if model is None:
            raise KftpError(f"predictor {name!r} needs a fitted model (--model)")
        return KftpPredictor(model) if key == "kftp" else MlrPredictor(model)
    raise UnknownPredictorError(f"unknown predictor {name!r}; valid names: {', '.join(PREDICTOR_NAMES)}")


def rolling_predictions(predictor: Predictor, throughput, features=None, lead: int = 1) -> np.ndarray:
    """Walk a series and record the forecast of each sample issued ``lead`` steps before it.

    Entries ``[0, lead)`` have no forecast and are NaN.
    """
    x = np.asarray(throughput, dtype=float)
    u = np.empty((x.size, 0)) if features is None else np.asarray(features, dtype=float).reshape(x.size, -1)
    out = np.full(x.size, math.nan)
    for j in range(x.size - lead):
        predictor.observe(x[j], tuple(u[j]))
        out[j + lead] = predictor.predict()
    return out
